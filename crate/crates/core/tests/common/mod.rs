//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's numerics: models are plain nested
//! vectors and every formula is written out directly.

#![allow(dead_code)]

use std::cmp::Ordering;

use fedcme::data::Dataset;
use fedcme::model::SplitModel;

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        (dot / (nu * nv)).clamp(-1.0, 1.0)
    }
}

fn on_quarter_grid(v: &[f64]) -> bool {
    v.iter().all(|x| (4.0 * x).fract() == 0.0 && x.abs() < 1e6)
}

/// `(dot, |u|²·|v|²)` of two quarter-grid vectors, scaled to integers.
fn exact_parts(u: &[f64], v: &[f64]) -> (i128, i128) {
    let iu: Vec<i128> = u.iter().map(|x| (4.0 * x) as i128).collect();
    let iv: Vec<i128> = v.iter().map(|x| (4.0 * x) as i128).collect();
    let dot = iu.iter().zip(&iv).map(|(a, b)| a * b).sum();
    let nu: i128 = iu.iter().map(|a| a * a).sum();
    let nv: i128 = iv.iter().map(|a| a * a).sum();
    (dot, nu * nv)
}

/// Orders `cos(a, b)` against `cos(c, d)`. Quarter-grid inputs are compared
/// exactly in integers; anything else falls back to floating point.
pub fn compare_cosines(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Ordering {
    if ![a, b, c, d].iter().all(|v| on_quarter_grid(v)) {
        return cosine(a, b).partial_cmp(&cosine(c, d)).unwrap();
    }
    // cos = dot / sqrt(p), and 0 when p = 0
    let (d1, p1) = exact_parts(a, b);
    let (d2, p2) = exact_parts(c, d);
    let (d1, p1) = if p1 == 0 { (0, 1) } else { (d1, p1) };
    let (d2, p2) = if p2 == 0 { (0, 1) } else { (d2, p2) };
    match (d1.signum(), d2.signum()) {
        (s1, s2) if s1 != s2 => s1.cmp(&s2),
        (0, _) => Ordering::Equal,
        (1, _) => (d1 * d1 * p2).cmp(&(d2 * d2 * p1)),
        _ => (d2 * d2 * p1).cmp(&(d1 * d1 * p2)),
    }
}

/// Straight-line greedy matching: returns `(pairs with a < b, unmatched)`.
pub fn greedy_matching(
    selected: &[usize],
    vectors: &[Vec<f64>],
) -> (Vec<(usize, usize)>, Vec<usize>) {
    // the sum points the same way as the mean and stays on the grid
    let dim = vectors[selected[0]].len();
    let mut center = vec![0.0; dim];
    for &k in selected {
        for i in 0..dim {
            center[i] += vectors[k][i];
        }
    }
    if !on_quarter_grid(&center) {
        center.iter_mut().for_each(|c| *c /= selected.len() as f64);
    }
    let mut queue: Vec<usize> = selected.to_vec();
    queue.sort_by(|&a, &b| {
        compare_cosines(&vectors[a], &center, &vectors[b], &center).then(a.cmp(&b))
    });
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    while !queue.is_empty() {
        let k = queue.remove(0);
        if queue.is_empty() {
            unmatched.push(k);
            break;
        }
        let mut best = 0;
        for i in 1..queue.len() {
            let order = compare_cosines(
                &vectors[k],
                &vectors[queue[i]],
                &vectors[k],
                &vectors[queue[best]],
            );
            if order == Ordering::Less || (order == Ordering::Equal && queue[i] < queue[best]) {
                best = i;
            }
        }
        let j = queue.remove(best);
        pairs.push((k.min(j), k.max(j)));
    }
    pairs.sort();
    (pairs, unmatched)
}

/// Direct weighted sum `Σ_k D_k / denom · w_k`.
pub fn weighted_sum(models: &[Vec<f64>], sizes: &[usize], denom: usize) -> Vec<f64> {
    let mut out = vec![0.0; models[0].len()];
    for (w, &d) in models.iter().zip(sizes) {
        for (o, v) in out.iter_mut().zip(w) {
            *o += d as f64 / denom as f64 * v;
        }
    }
    out
}

/// Feature averaging with memory substitution; `None` marks an unset class.
/// Clients with `local = None` did not report features at all.
pub fn memory_average(
    locals: &[Option<Vec<Option<Vec<f64>>>>],
    global: &[Option<Vec<f64>>],
) -> Vec<Option<Vec<f64>>> {
    let mut out = global.to_vec();
    for c in 0..global.len() {
        let mut values: Vec<&Vec<f64>> = Vec::new();
        for local in locals.iter().flatten() {
            if let Some(v) = &local[c] {
                values.push(v);
            } else if let Some(g) = &global[c] {
                values.push(g);
            }
        }
        if values.is_empty() {
            continue;
        }
        let mut sum = vec![0.0; values[0].len()];
        for v in &values {
            for (s, x) in sum.iter_mut().zip(v.iter()) {
                *s += x;
            }
        }
        out[c] = Some(sum.iter().map(|s| s / values.len() as f64).collect());
    }
    out
}

/// Total-variation distance between two distributions.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Mean TV distance of the nonempty clients' label histograms to the
/// pooled label histogram.
pub fn mean_heterogeneity(labels: &[usize], classes: usize, clients: &[Vec<usize>]) -> f64 {
    let hist = |idx: &mut dyn Iterator<Item = usize>| {
        let mut h = vec![0.0; classes];
        let mut n = 0.0;
        for i in idx {
            h[labels[i]] += 1.0;
            n += 1.0;
        }
        h.iter().map(|v| v / n).collect::<Vec<f64>>()
    };
    let global = hist(&mut (0..labels.len()));
    let nonempty: Vec<&Vec<usize>> = clients.iter().filter(|c| !c.is_empty()).collect();
    nonempty
        .iter()
        .map(|c| tv_distance(&hist(&mut c.iter().copied()), &global))
        .sum::<f64>()
        / nonempty.len() as f64
}

/// One-hidden-layer MLP `x → relu(W1 x + b1) → W2 f + b2` in plain vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RefNet {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl RefNet {
    pub fn from_model(m: &SplitModel) -> Self {
        assert_eq!(m.extractor().len(), 1, "reference net has one hidden layer");
        let unpack =
            |t: &fedcme::Tensor| (0..t.rows()).map(|r| t.row(r).to_vec()).collect::<Vec<_>>();
        let e = &m.extractor()[0];
        let c = m.classifier();
        RefNet {
            w1: unpack(&e.weights),
            b1: e.bias.data().to_vec(),
            w2: unpack(&c.weights),
            b2: c.bias.data().to_vec(),
        }
    }

    /// Parameters in extractor-then-classifier, weights-then-bias order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.w1.iter().for_each(|r| out.extend(r));
        out.extend(&self.b1);
        self.w2.iter().for_each(|r| out.extend(r));
        out.extend(&self.b2);
        out
    }

    pub fn features(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pre: Vec<f64> = self
            .w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let f = pre.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        (pre, f)
    }

    pub fn logits(&self, f: &[f64]) -> Vec<f64> {
        self.w2
            .iter()
            .zip(&self.b2)
            .map(|(row, b)| row.iter().zip(f).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(&self.features(x).1);
        let mut best = 0;
        for c in 1..z.len() {
            if z[c] > z[best] {
                best = c;
            }
        }
        best
    }

    /// One SGD step on mean cross-entropy plus `mu · Σ_c ‖mean_c f − ζ_c‖²`.
    /// Returns the loss and the features of every sample (pre-step).
    pub fn sgd_step(
        &mut self,
        xs: &[Vec<f64>],
        ys: &[usize],
        zeta: &[Option<Vec<f64>>],
        mu: f64,
        lr: f64,
    ) -> (f64, Vec<Vec<f64>>) {
        let n = xs.len() as f64;
        let classes = self.b2.len();
        let hidden = self.b1.len();
        let fwd: Vec<(Vec<f64>, Vec<f64>)> = xs.iter().map(|x| self.features(x)).collect();

        let mut loss = 0.0;
        let mut dlogits = Vec::new();
        for ((_, f), &y) in fwd.iter().zip(ys) {
            let z = self.logits(f);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = z.iter().map(|v| (v - max).exp()).sum();
            loss += max + denom.ln() - z[y];
            let d: Vec<f64> = (0..classes)
                .map(|c| ((z[c] - max).exp() / denom - if c == y { 1.0 } else { 0.0 }) / n)
                .collect();
            dlogits.push(d);
        }
        loss /= n;

        let mut dfeat: Vec<Vec<f64>> = vec![vec![0.0; hidden]; xs.len()];
        for (c, target) in zeta.iter().enumerate() {
            let Some(target) = target else { continue };
            let members: Vec<usize> = (0..ys.len()).filter(|&i| ys[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let m = members.len() as f64;
            for h in 0..hidden {
                let mean = members.iter().map(|&i| fwd[i].1[h]).sum::<f64>() / m;
                let diff = mean - target[h];
                loss += mu * diff * diff;
                for &i in &members {
                    dfeat[i][h] += mu * 2.0 * diff / m;
                }
            }
        }

        let mut gw2 = vec![vec![0.0; hidden]; classes];
        let mut gb2 = vec![0.0; classes];
        let mut gw1 = vec![vec![0.0; self.w1[0].len()]; hidden];
        let mut gb1 = vec![0.0; hidden];
        for i in 0..xs.len() {
            let (pre, f) = &fwd[i];
            for c in 0..classes {
                gb2[c] += dlogits[i][c];
                for h in 0..hidden {
                    gw2[c][h] += dlogits[i][c] * f[h];
                    dfeat[i][h] += self.w2[c][h] * dlogits[i][c];
                }
            }
            for h in 0..hidden {
                let dh = if pre[h] > 0.0 { dfeat[i][h] } else { 0.0 };
                gb1[h] += dh;
                for (g, x) in gw1[h].iter_mut().zip(&xs[i]) {
                    *g += dh * x;
                }
            }
        }
        let step =
            |p: &mut Vec<f64>, g: &Vec<f64>| p.iter_mut().zip(g).for_each(|(a, b)| *a -= lr * b);
        self.w1.iter_mut().zip(&gw1).for_each(|(p, g)| step(p, g));
        step(&mut self.b1, &gb1);
        self.w2.iter_mut().zip(&gw2).for_each(|(p, g)| step(p, g));
        step(&mut self.b2, &gb2);
        (loss, fwd.into_iter().map(|(_, f)| f).collect())
    }
}

pub fn rows_of(ds: &Dataset, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let xs = indices
        .iter()
        .map(|&i| ds.features().row(i).to_vec())
        .collect();
    let ys = indices.iter().map(|&i| ds.labels()[i]).collect();
    (xs, ys)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

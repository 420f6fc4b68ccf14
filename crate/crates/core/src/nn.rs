//! Dense layers, activations and losses with hand-written gradients.
//!
//! Every loss returns `(value, gradient)` so callers can compose them without
//! a tape. Gradients are checked against [`finite_difference_grad`] in tests.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    /// `[out × in]`
    pub weights: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl LinearLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::dim(
                "LinearLayer weights rank",
                2,
                weights.shape().len(),
            ));
        }
        if bias.shape() != [weights.rows()] {
            return Err(Error::dim(
                "LinearLayer bias",
                format!("[{}]", weights.rows()),
                format!("{:?}", bias.shape()),
            ));
        }
        Ok(Self { weights, bias })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            weights: Tensor::new(vec![outputs, inputs], data).expect("glorot shape"),
            bias: Tensor::zeros(vec![outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn same_shape(&self, other: &LinearLayer) -> bool {
        self.weights.same_shape(&other.weights) && self.bias.same_shape(&other.bias)
    }
}

/// `out[b][o] = Σ_i x[b][i]·W[o][i] + bias[o]`
pub fn linear_forward(x: &Tensor, layer: &LinearLayer) -> Result<Tensor> {
    if x.shape().len() != 2 || x.cols() != layer.inputs() {
        return Err(Error::dim(
            "linear_forward input width",
            layer.inputs(),
            format!("{:?}", x.shape()),
        ));
    }
    let (batch, outs) = (x.rows(), layer.outputs());
    let mut out = Vec::with_capacity(batch * outs);
    for b in 0..batch {
        let xb = x.row(b);
        for o in 0..outs {
            let acc: f64 = layer
                .weights
                .row(o)
                .iter()
                .zip(xb)
                .map(|(w, v)| w * v)
                .sum();
            out.push(acc + layer.bias.data()[o]);
        }
    }
    Ok(Tensor::new(vec![batch, outs], out).expect("linear_forward shape"))
}

pub struct LinearGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Backward pass of [`linear_forward`] given the upstream gradient `dout`.
pub fn linear_backward(x: &Tensor, layer: &LinearLayer, dout: &Tensor) -> Result<LinearGrads> {
    let (batch, ins, outs) = (x.rows(), layer.inputs(), layer.outputs());
    if dout.shape() != [batch, outs] {
        return Err(Error::dim(
            "linear_backward upstream",
            format!("[{batch}, {outs}]"),
            format!("{:?}", dout.shape()),
        ));
    }
    let mut dw = Tensor::zeros(vec![outs, ins]);
    let mut db = Tensor::zeros(vec![outs]);
    let mut dx = Tensor::zeros(vec![batch, ins]);
    for b in 0..batch {
        let xb = x.row(b);
        let gb = dout.row(b);
        for (o, &g) in gb.iter().enumerate() {
            db.data_mut()[o] += g;
            for (acc, v) in dw.row_mut(o).iter_mut().zip(xb) {
                *acc += g * v;
            }
        }
        let dxb = dx.row_mut(b);
        for (o, &g) in gb.iter().enumerate() {
            for (acc, w) in dxb.iter_mut().zip(layer.weights.row(o)) {
                *acc += g * w;
            }
        }
    }
    Ok(LinearGrads {
        input: dx,
        weights: dw,
        bias: db,
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Zeroes the upstream gradient wherever the forward input was `<= 0`.
pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    if !x.same_shape(upstream) {
        return Err(Error::dim(
            "relu_backward",
            format!("{:?}", x.shape()),
            format!("{:?}", upstream.shape()),
        ));
    }
    let mut out = upstream.clone();
    for (g, &v) in out.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(out)
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for r in 0..logits.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::dim("labels length", batch, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Validation(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Mean cross-entropy over the batch and its gradient `(softmax − onehot)/B`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (batch, classes) = (logits.rows(), logits.cols());
    check_labels(labels, batch, classes)?;
    if batch == 0 {
        return Ok((0.0, logits.clone()));
    }
    let mut probs = softmax(logits);
    let scale = 1.0 / batch as f64;
    let mut loss = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        let row = probs.row_mut(b);
        // log-sum-exp form keeps the loss finite for saturated wrong logits
        let z = logits.row(b);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[label];
        row[label] -= 1.0;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok((loss * scale, probs))
}

/// Cross-entropy over logits rescaled per class before the softmax.
///
/// FedRS multiplies the logits of classes missing from the client's data by
/// `α ∈ (0, 1]`; the gradient is pulled back through the same scaling.
pub fn restricted_softmax_cross_entropy(
    logits: &Tensor,
    labels: &[usize],
    class_scale: &[f64],
) -> Result<(f64, Tensor)> {
    if class_scale.len() != logits.cols() {
        return Err(Error::dim("class_scale", logits.cols(), class_scale.len()));
    }
    let mut scaled = logits.clone();
    for r in 0..scaled.rows() {
        for (v, s) in scaled.row_mut(r).iter_mut().zip(class_scale) {
            *v *= s;
        }
    }
    let (loss, mut grad) = softmax_cross_entropy(&scaled, labels)?;
    for r in 0..grad.rows() {
        for (g, s) in grad.row_mut(r).iter_mut().zip(class_scale) {
            *g *= s;
        }
    }
    Ok((loss, grad))
}

/// Per-class feature table with "not yet set" entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFeatures {
    dim: usize,
    entries: Vec<Option<Vec<f64>>>,
}

impl ClassFeatures {
    pub fn unset(classes: usize, dim: usize) -> Self {
        Self {
            dim,
            entries: vec![None; classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.entries.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, class: usize) -> Option<&[f64]> {
        self.entries.get(class).and_then(|e| e.as_deref())
    }

    pub fn is_set(&self, class: usize) -> bool {
        self.get(class).is_some()
    }

    pub fn set(&mut self, class: usize, value: Vec<f64>) -> Result<()> {
        if value.len() != self.dim {
            return Err(Error::dim("ClassFeatures::set", self.dim, value.len()));
        }
        if class >= self.entries.len() {
            return Err(Error::Validation(format!("class {class} out of range")));
        }
        self.entries[class] = Some(value);
        Ok(())
    }

    pub fn clear(&mut self, class: usize) {
        self.entries[class] = None;
    }

    pub fn entries(&self) -> &[Option<Vec<f64>>] {
        &self.entries
    }
}

/// Feature-alignment loss `Σ_c ‖mean_{i: y_i = c} f_i − ζ[c]‖²`.
///
/// Only classes present in the batch with a set global entry contribute;
/// each member of class `c` receives `2·(mean_c − ζ[c]) / |B_c|`.
pub fn l2_feature_loss(
    features: &Tensor,
    labels: &[usize],
    global: &ClassFeatures,
) -> Result<(f64, Tensor)> {
    let (batch, dim) = (features.rows(), features.cols());
    if dim != global.dim() {
        return Err(Error::dim(
            "l2_feature_loss feature width",
            global.dim(),
            dim,
        ));
    }
    check_labels(labels, batch, global.num_classes())?;

    let classes = global.num_classes();
    let mut sums = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (b, &label) in labels.iter().enumerate() {
        counts[label] += 1;
        for (s, v) in sums[label].iter_mut().zip(features.row(b)) {
            *s += v;
        }
    }

    let mut loss = 0.0;
    // per-class gradient shared by every member of the class
    let mut class_grad: Vec<Option<Vec<f64>>> = vec![None; classes];
    for c in 0..classes {
        let Some(target) = global.get(c) else {
            continue;
        };
        if counts[c] == 0 {
            continue;
        }
        let n = counts[c] as f64;
        let mut g = Vec::with_capacity(dim);
        for (s, t) in sums[c].iter().zip(target) {
            let diff = s / n - t;
            loss += diff * diff;
            g.push(2.0 * diff / n);
        }
        class_grad[c] = Some(g);
    }

    let mut grad = Tensor::zeros(vec![batch, dim]);
    for (b, &label) in labels.iter().enumerate() {
        if let Some(g) = &class_grad[label] {
            grad.row_mut(b).copy_from_slice(g);
        }
    }
    Ok((loss, grad))
}

/// One gradient tensor per parameter tensor, in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub grads: Vec<Tensor>,
}

impl GradBundle {
    pub fn zeros_like(params: &[&Tensor]) -> Self {
        Self {
            grads: params
                .iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect(),
        }
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, other: &GradBundle, scale: f64) -> Result<()> {
        check_bundle_shapes(self.grads.iter(), &other.grads)?;
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
        Ok(())
    }
}

fn check_bundle_shapes<'a>(
    params: impl ExactSizeIterator<Item = &'a Tensor>,
    grads: &[Tensor],
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dim(
            "gradient bundle length",
            params.len(),
            grads.len(),
        ));
    }
    for (p, g) in params.zip(grads) {
        if !p.same_shape(g) {
            return Err(Error::dim(
                "gradient bundle entry",
                format!("{:?}", p.shape()),
                format!("{:?}", g.shape()),
            ));
        }
    }
    Ok(())
}

/// `p ← p − lr·g` for every parameter entry.
pub fn sgd_step<'a>(
    params: impl IntoIterator<Item = &'a mut Tensor>,
    grads: &GradBundle,
    lr: f64,
) -> Result<()> {
    let mut params: Vec<&mut Tensor> = params.into_iter().collect();
    check_bundle_shapes(params.iter().map(|p| &**p), &grads.grads)?;
    for (p, g) in params.iter_mut().zip(&grads.grads) {
        for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= lr * d;
        }
    }
    Ok(())
}

/// FedProx penalty `(μ/2)·Σ‖p − anchor‖²` and its gradient `μ·(p − anchor)`.
pub fn proximal_term(params: &[&Tensor], anchor: &[&Tensor], mu: f64) -> Result<(f64, GradBundle)> {
    let anchor_owned: Vec<Tensor> = anchor.iter().map(|t| (*t).clone()).collect();
    check_bundle_shapes(params.iter().copied(), &anchor_owned)?;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(params.len());
    for (p, a) in params.iter().zip(anchor) {
        let mut g = Tensor::zeros(p.shape().to_vec());
        for ((d, w), w0) in g.data_mut().iter_mut().zip(p.data()).zip(a.data()) {
            let diff = w - w0;
            loss += diff * diff;
            *d = mu * diff;
        }
        grads.push(g);
    }
    Ok((0.5 * mu * loss, GradBundle { grads }))
}

/// Central-difference gradient of `loss` with respect to every entry of
/// `params`. Used as a test oracle for the analytic gradients.
pub fn finite_difference_grad<F>(mut loss: F, params: &[Tensor], eps: f64) -> GradBundle
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for t in 0..params.len() {
        let mut g = Tensor::zeros(params[t].shape().to_vec());
        for i in 0..params[t].len() {
            let orig = work[t].data()[i];
            work[t].data_mut()[i] = orig + eps;
            let plus = loss(&work);
            work[t].data_mut()[i] = orig - eps;
            let minus = loss(&work);
            work[t].data_mut()[i] = orig;
            g.data_mut()[i] = (plus - minus) / (2.0 * eps);
        }
        grads.push(g);
    }
    GradBundle { grads }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t2(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    fn layer(w: &[Vec<f64>], b: &[f64]) -> LinearLayer {
        LinearLayer::new(t2(w), Tensor::vector(b.to_vec()).unwrap()).unwrap()
    }

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    fn max_rel_err(a: &GradBundle, b: &GradBundle) -> f64 {
        a.grads
            .iter()
            .zip(&b.grads)
            .flat_map(|(x, y)| x.data().iter().zip(y.data()))
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn linear_forward_examples() {
        let id = layer(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]);
        assert_eq!(
            linear_forward(&t2(&[vec![1.0, 2.0]]), &id).unwrap().data(),
            &[1.0, 2.0]
        );

        let any = layer(&[vec![7.0, -3.0], vec![0.5, 9.0]], &[3.0, 4.0]);
        assert_eq!(
            linear_forward(&t2(&[vec![0.0, 0.0]]), &any).unwrap().data(),
            &[3.0, 4.0]
        );

        let l = layer(&[vec![2.0, 3.0]], &[1.0]);
        assert_eq!(
            linear_forward(&t2(&[vec![1.0, 1.0]]), &l).unwrap().data(),
            &[6.0]
        );
    }

    #[test]
    fn linear_forward_rejects_width_mismatch() {
        let l = layer(&[vec![2.0, 3.0]], &[1.0]);
        assert!(matches!(
            linear_forward(&t2(&[vec![1.0, 1.0, 1.0]]), &l),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn layer_rejects_inconsistent_bias() {
        let w = t2(&[vec![1.0, 0.0]]);
        assert!(LinearLayer::new(w, Tensor::vector(vec![0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn relu_examples() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);

        let x = Tensor::vector(vec![-1.0, 2.0]).unwrap();
        let up = Tensor::vector(vec![5.0, 5.0]).unwrap();
        assert_eq!(relu_backward(&x, &up).unwrap().data(), &[0.0, 5.0]);

        let pos = Tensor::vector(vec![0.5, 3.0]).unwrap();
        assert_eq!(relu(&pos), pos);
        assert_eq!(relu_backward(&pos, &up).unwrap(), up);
    }

    #[test]
    fn cross_entropy_uniform_and_saturated() {
        let (loss, _) = softmax_cross_entropy(&t2(&[vec![0.0, 0.0]]), &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);

        let (loss, grad) = softmax_cross_entropy(&t2(&[vec![100.0, 0.0]]), &[0]).unwrap();
        assert!(loss < 1e-40);
        assert!(grad.data().iter().all(|g| g.abs() < 1e-40));
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        assert!(matches!(
            softmax_cross_entropy(&t2(&[vec![0.0, 0.0]]), &[2]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn softmax_rows_and_dlogit_rows_sum_correctly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let logits = random_tensor(&mut rng, vec![5, 4]);
            let labels: Vec<usize> = (0..5).map(|_| rng.random_range(0..4)).collect();
            let probs = softmax(&logits);
            let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
            for r in 0..5 {
                assert!((probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(grad.row(r).iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = random_tensor(&mut rng, vec![3, 4]);
        let labels = [1, 3, 0];
        let (_, analytic) = softmax_cross_entropy(&logits, &labels).unwrap();
        let numeric = finite_difference_grad(
            |p| softmax_cross_entropy(&p[0], &labels).unwrap().0,
            &[logits],
            1e-5,
        );
        let analytic = GradBundle {
            grads: vec![analytic],
        };
        assert!(max_rel_err(&analytic, &numeric) < 1e-6);
    }

    #[test]
    fn restricted_softmax_with_unit_scale_is_plain_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let logits = random_tensor(&mut rng, vec![4, 3]);
        let labels = [0, 1, 2, 1];
        let plain = softmax_cross_entropy(&logits, &labels).unwrap();
        let restricted = restricted_softmax_cross_entropy(&logits, &labels, &[1.0; 3]).unwrap();
        assert_eq!(plain.0.to_bits(), restricted.0.to_bits());
        assert_eq!(plain.1, restricted.1);
    }

    #[test]
    fn l2_feature_loss_examples() {
        let mut global = ClassFeatures::unset(2, 2);
        global.set(1, vec![0.0, 0.0]).unwrap();
        let (loss, grad) = l2_feature_loss(&t2(&[vec![1.0, 0.0]]), &[1], &global).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.data(), &[2.0, 0.0]);

        // batch means equal to the targets
        global.set(0, vec![1.0, 1.0]).unwrap();
        let feats = t2(&[
            vec![0.0, 2.0],
            vec![2.0, 0.0],
            vec![0.5, -0.5],
            vec![-0.5, 0.5],
        ]);
        let (loss, grad) = l2_feature_loss(&feats, &[0, 0, 1, 1], &global).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn l2_feature_loss_skips_unset_classes() {
        let global = ClassFeatures::unset(3, 2);
        let (loss, grad) =
            l2_feature_loss(&t2(&[vec![4.0, 1.0], vec![1.0, 1.0]]), &[0, 2], &global).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn l2_feature_loss_rejects_dimension_mismatch() {
        let global = ClassFeatures::unset(2, 3);
        assert!(matches!(
            l2_feature_loss(&t2(&[vec![1.0, 0.0]]), &[0], &global),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn l2_feature_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let feats = random_tensor(&mut rng, vec![6, 3]);
        let labels = [0, 2, 2, 1, 0, 2];
        let mut global = ClassFeatures::unset(4, 3);
        for c in 0..3 {
            global
                .set(c, (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
        }
        let (_, analytic) = l2_feature_loss(&feats, &labels, &global).unwrap();
        let numeric = finite_difference_grad(
            |p| l2_feature_loss(&p[0], &labels, &global).unwrap().0,
            &[feats],
            1e-5,
        );
        assert!(
            max_rel_err(
                &GradBundle {
                    grads: vec![analytic]
                },
                &numeric
            ) < 1e-6
        );
    }

    #[test]
    fn sgd_step_examples() {
        let mut p = [Tensor::vector(vec![1.0]).unwrap()];
        let g = GradBundle {
            grads: vec![Tensor::vector(vec![2.0]).unwrap()],
        };
        sgd_step(p.iter_mut(), &g, 0.5).unwrap();
        assert_eq!(p[0].data(), &[0.0]);

        let mut q = [Tensor::vector(vec![1.5, -2.0]).unwrap()];
        let before = q.clone();
        sgd_step(
            q.iter_mut(),
            &GradBundle {
                grads: vec![Tensor::zeros(vec![2])],
            },
            0.01,
        )
        .unwrap();
        assert_eq!(q, before);

        let g = GradBundle {
            grads: vec![Tensor::vector(vec![3.0, 4.0]).unwrap()],
        };
        sgd_step(q.iter_mut(), &g, 0.0).unwrap();
        assert_eq!(q, before);
    }

    #[test]
    fn sgd_step_rejects_shape_mismatch() {
        let mut p = [Tensor::vector(vec![1.0]).unwrap()];
        let g = GradBundle {
            grads: vec![Tensor::zeros(vec![2])],
        };
        assert!(sgd_step(p.iter_mut(), &g, 0.1).is_err());
    }

    #[test]
    fn finite_difference_examples() {
        let p = [Tensor::vector(vec![3.0]).unwrap()];
        let g = finite_difference_grad(|p| p[0].data()[0].powi(2), &p, 1e-5);
        assert!((g.grads[0].data()[0] - 6.0).abs() < 1e-6);

        let g = finite_difference_grad(|_| 4.2, &p, 1e-5);
        assert_eq!(g.grads[0].data(), &[0.0]);
    }

    #[test]
    fn proximal_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = vec![
            random_tensor(&mut rng, vec![3, 2]),
            random_tensor(&mut rng, vec![3]),
        ];
        let anchor = [
            random_tensor(&mut rng, vec![3, 2]),
            random_tensor(&mut rng, vec![3]),
        ];
        let anchor_refs: Vec<&Tensor> = anchor.iter().collect();
        let (_, analytic) =
            proximal_term(&params.iter().collect::<Vec<_>>(), &anchor_refs, 0.3).unwrap();
        let numeric = finite_difference_grad(
            |p| {
                proximal_term(&p.iter().collect::<Vec<_>>(), &anchor_refs, 0.3)
                    .unwrap()
                    .0
            },
            &params,
            1e-5,
        );
        assert!(max_rel_err(&analytic, &numeric) < 1e-6);
    }
}

//! Datasets, heterogeneous client partitions and seeded batching.

use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for, SimRng, Stream};
use crate::tensor::Tensor;

use rand::SeedableRng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Default share of a client's data used for self-evaluation.
pub const DEFAULT_EVAL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Tensor,
    y: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(x: Tensor, y: Vec<usize>, num_classes: usize) -> Result<Self> {
        if x.shape().len() != 2 {
            return Err(Error::dim("Dataset features rank", 2, x.shape().len()));
        }
        if x.rows() != y.len() {
            return Err(Error::Validation(format!(
                "{} feature rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self { x, y, num_classes })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Tensor {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    /// Re-declares the class count, e.g. 10 for FMNIST even when a small
    /// file happens not to contain every label.
    pub fn with_num_classes(self, num_classes: usize) -> Result<Self> {
        Self::new(self.x, self.y, num_classes)
    }

    /// Gathers `indices` into a batch.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        (
            self.x.select_rows(indices),
            indices.iter().map(|&i| self.y[i]).collect(),
        )
    }

    pub fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &i in indices {
            counts[self.y[i]] += 1;
        }
        counts
    }

    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.y[i] == class).collect()
    }
}

/// Isotropic Gaussian class clusters around fixed random centers.
#[derive(Debug, Clone)]
pub struct BlobGenerator {
    centers: Vec<Vec<f64>>,
    spread: f64,
}

const CENTER_ATTEMPTS: usize = 10_000;

impl BlobGenerator {
    /// Draws one standard-normal center per class, resampling until every
    /// pair is at least `4·spread` apart.
    pub fn new(classes: usize, dim: usize, spread: f64, seed: u64) -> Result<Self> {
        if classes < 2 || dim < 2 {
            return Err(Error::Validation(format!(
                "blobs need at least 2 classes and 2 dimensions, got {classes} and {dim}"
            )));
        }
        if !(spread >= 0.0 && spread.is_finite()) {
            return Err(Error::Validation(format!("invalid blob spread {spread}")));
        }
        let mut rng = rng_for(seed, Stream::BlobCenters, &[]);
        let min_gap = 4.0 * spread;
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        for _ in 0..CENTER_ATTEMPTS {
            let centers: Vec<Vec<f64>> = (0..classes)
                .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let gap = min_pairwise_distance(&centers);
            if gap >= min_gap {
                return Ok(Self { centers, spread });
            }
            if best.as_ref().is_none_or(|(g, _)| gap > *g) {
                best = Some((gap, centers));
            }
        }
        // Spread too large for unit-scale centers: stretch the best draw.
        let (gap, mut centers) = best.expect("at least one attempt");
        warn!("blob centers rescaled to reach a {min_gap:.3} separation");
        let factor = min_gap / gap;
        for v in centers.iter_mut().flatten() {
            *v *= factor;
        }
        Ok(Self { centers, spread })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    /// `n_per_class` samples of every class, grouped by class.
    pub fn sample(&self, n_per_class: usize, seed: u64) -> Dataset {
        let mut rng = rng_for(seed, Stream::Blobs, &[]);
        let classes = self.centers.len();
        let dim = self.centers[0].len();
        let mut data = Vec::with_capacity(classes * n_per_class * dim);
        let mut labels = Vec::with_capacity(classes * n_per_class);
        for (c, center) in self.centers.iter().enumerate() {
            for _ in 0..n_per_class {
                for &m in center {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(m + self.spread * z);
                }
                labels.push(c);
            }
        }
        let x = Tensor::new(vec![labels.len(), dim], data).expect("blob shape");
        Dataset::new(x, labels, classes).expect("blob labels in range")
    }
}

fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    best
}

/// Synthetic Gaussian blobs, `n_per_class` samples for each of `classes`.
pub fn generate_blobs(
    classes: usize,
    dim: usize,
    n_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    Ok(BlobGenerator::new(classes, dim, spread, seed)?.sample(n_per_class, seed))
}

struct IdxReader<'a> {
    path: &'a Path,
    bytes: Vec<u8>,
}

impl IdxReader<'_> {
    fn header(&self, magic: u32, dims: usize) -> Result<Vec<usize>> {
        let need = 4 * (dims + 1);
        if self.bytes.len() < need {
            return Err(self.err(format!(
                "truncated header: {} bytes, need {need}",
                self.bytes.len()
            )));
        }
        let word = |i: usize| u32::from_be_bytes(self.bytes[4 * i..4 * i + 4].try_into().unwrap());
        let found = word(0);
        if found != magic {
            return Err(self.err(format!(
                "magic number {found:#010x}, expected {magic:#010x}"
            )));
        }
        Ok((1..=dims).map(|i| word(i) as usize).collect())
    }

    fn body(&self, offset: usize, len: usize) -> Result<&[u8]> {
        let end = offset + len;
        if self.bytes.len() < end {
            return Err(self.err(format!(
                "truncated body: {} bytes, need {end}",
                self.bytes.len()
            )));
        }
        Ok(&self.bytes[offset..end])
    }

    fn err(&self, reason: String) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            reason,
        }
    }
}

/// Reads an IDX image/label file pair (big-endian, unsigned bytes).
/// Pixels are scaled to `[0, 1]`; the class count is `max label + 1`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = IdxReader {
        path: images_path.as_ref(),
        bytes: fs::read(images_path.as_ref())?,
    };
    let labels = IdxReader {
        path: labels_path.as_ref(),
        bytes: fs::read(labels_path.as_ref())?,
    };

    let dims = images.header(IDX_IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let pixels = images.body(16, count * rows * cols)?;
    let label_count = labels.header(IDX_LABELS_MAGIC, 1)?[0];
    if label_count != count {
        return Err(Error::Validation(format!(
            "{count} images but {label_count} labels"
        )));
    }
    let y: Vec<usize> = labels.body(8, count)?.iter().map(|&b| b as usize).collect();

    let x = Tensor::new(
        vec![count, rows * cols],
        pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )?;
    let classes = y.iter().max().map_or(0, |m| m + 1);
    Dataset::new(x, y, classes)
}

/// Writes `ds` as an IDX pair with `rows × cols` images. Features are
/// expected in `[0, 1]` and are quantised back to bytes.
pub fn write_idx(
    ds: &Dataset,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    if rows * cols != ds.dim() {
        return Err(Error::dim("write_idx image size", ds.dim(), rows * cols));
    }
    if let Some(&bad) = ds.labels().iter().find(|&&l| l > u8::MAX as usize) {
        return Err(Error::Validation(format!(
            "label {bad} does not fit in a byte"
        )));
    }
    let mut img = Vec::with_capacity(16 + ds.len() * rows * cols);
    for word in [IDX_IMAGES_MAGIC, ds.len() as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&word.to_be_bytes());
    }
    img.extend(
        ds.features()
            .data()
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    let mut lab = Vec::with_capacity(8 + ds.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    lab.extend(ds.labels().iter().map(|&l| l as u8));
    fs::write(images_path, img)?;
    fs::write(labels_path, lab)?;
    Ok(())
}

/// Per-client index lists into a parent dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    clients: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates disjointness and index range against a dataset of `len`.
    pub fn new(clients: Vec<Vec<usize>>, len: usize) -> Result<Self> {
        let mut seen = vec![false; len];
        for (k, idx) in clients.iter().enumerate() {
            for &i in idx {
                if i >= len {
                    return Err(Error::Validation(format!(
                        "client {k}: index {i} out of range"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Validation(format!("index {i} assigned twice")));
                }
            }
        }
        Ok(Self { clients })
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn client(&self, k: usize) -> &[usize] {
        &self.clients[k]
    }

    pub fn clients(&self) -> &[Vec<usize>] {
        &self.clients
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clients.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.clients.iter().map(Vec::len).sum()
    }

    /// Clients holding at least one sample.
    pub fn nonempty_clients(&self) -> Vec<usize> {
        (0..self.clients.len())
            .filter(|&k| !self.clients[k].is_empty())
            .collect()
    }
}

fn dirichlet_proportions(k: usize, alpha: f64, rng: &mut SimRng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter().map(|g| g / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

/// Integer counts summing to `total`, proportional to `weights`, using
/// largest-remainder rounding (ties to the lower index).
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Splits every class across `k` clients by a fresh `Dir(α·1)` draw.
pub fn dirichlet_partition(ds: &Dataset, k: usize, alpha: f64, seed: u64) -> Result<Partition> {
    if k == 0 {
        return Err(Error::Validation("need at least one client".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Validation(format!(
            "Dirichlet alpha must be > 0, got {alpha}"
        )));
    }
    let mut rng = rng_for(seed, Stream::Partition, &[k as u64]);
    let mut clients = vec![Vec::new(); k];
    for c in 0..ds.num_classes() {
        let mut members = ds.indices_of_class(c);
        let proportions = dirichlet_proportions(k, alpha, &mut rng);
        members.shuffle(&mut rng);
        let counts = largest_remainder(&proportions, members.len());
        let mut rest = members.as_slice();
        for (client, n) in clients.iter_mut().zip(counts) {
            let (take, tail) = rest.split_at(n);
            client.extend_from_slice(take);
            rest = tail;
        }
    }
    for client in &mut clients {
        client.sort_unstable();
    }
    Partition::new(clients, ds.len())
}

/// Self-evaluation subset of one client's data.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSplit {
    pub indices: Vec<usize>,
    pub fraction: f64,
}

impl EvalSplit {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Uniform sample of `round(fraction·n)` of the client's indices.
pub fn split_eval(client_indices: &[usize], fraction: f64, seed: u64) -> Result<EvalSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Validation(format!(
            "evaluation fraction must be in (0, 1), got {fraction}"
        )));
    }
    if client_indices.is_empty() {
        warn!("evaluation split requested for an empty client");
    }
    let n = (fraction * client_indices.len() as f64).round() as usize;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut indices: Vec<usize> = index::sample(&mut rng, client_indices.len(), n)
        .into_iter()
        .map(|i| client_indices[i])
        .collect();
    indices.sort_unstable();
    Ok(EvalSplit { indices, fraction })
}

pub fn batch_seed(run_seed: u64, client: usize, round: usize, epoch: usize) -> u64 {
    derive_seed(
        run_seed,
        Stream::Batches,
        &[client as u64, round as u64, epoch as u64],
    )
}

pub fn eval_seed(run_seed: u64, client: usize, round: usize) -> u64 {
    derive_seed(run_seed, Stream::EvalSplit, &[client as u64, round as u64])
}

/// Shuffled mini-batches covering `indices`; the last batch may be short.
pub fn batch_iter(indices: &[usize], batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Validation("batch size must be at least 1".into()));
    }
    let mut order = indices.to_vec();
    order.shuffle(&mut SimRng::seed_from_u64(seed));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Label histogram of each client normalised to a distribution.
pub fn label_distribution(ds: &Dataset, indices: &[usize]) -> Vec<f64> {
    let counts = ds.class_counts(indices);
    let n = indices.len().max(1) as f64;
    counts.iter().map(|&c| c as f64 / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_count_per_class_and_determinism() {
        let ds = generate_blobs(2, 3, 10, 0.5, 9).unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.class_counts(&(0..20).collect::<Vec<_>>()), vec![10, 10]);
        assert_eq!(ds, generate_blobs(2, 3, 10, 0.5, 9).unwrap());
    }

    #[test]
    fn blob_centers_are_separated() {
        for spread in [0.1, 0.3, 2.0] {
            let gen = BlobGenerator::new(6, 4, spread, 1).unwrap();
            assert!(min_pairwise_distance(gen.centers()) >= 4.0 * spread - 1e-12);
        }
    }

    #[test]
    fn blobs_reject_degenerate_shapes() {
        assert!(generate_blobs(1, 3, 5, 0.1, 0).is_err());
        assert!(generate_blobs(3, 1, 5, 0.1, 0).is_err());
    }

    #[test]
    fn nearest_centroid_is_perfect_for_tight_blobs() {
        let ds = generate_blobs(5, 4, 30, 1e-3, 3).unwrap();
        let all: Vec<usize> = (0..ds.len()).collect();
        let mut centroids = vec![vec![0.0; 4]; 5];
        for &i in &all {
            for (c, v) in centroids[ds.labels()[i]]
                .iter_mut()
                .zip(ds.features().row(i))
            {
                *c += v / 30.0;
            }
        }
        for &i in &all {
            let row = ds.features().row(i);
            let nearest = (0..5)
                .min_by(|&a, &b| {
                    let da: f64 = centroids[a]
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c - v).powi(2))
                        .sum();
                    let db: f64 = centroids[b]
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c - v).powi(2))
                        .sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            assert_eq!(nearest, ds.labels()[i]);
        }
    }

    #[test]
    fn largest_remainder_conserves_total() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 10), vec![2, 3, 5]);
        assert_eq!(largest_remainder(&[0.34, 0.33, 0.33], 2), vec![1, 1, 0]);
    }

    #[test]
    fn single_client_gets_everything() {
        let ds = generate_blobs(3, 2, 7, 0.2, 1).unwrap();
        for alpha in [0.01, 1.0, 100.0] {
            let p = dirichlet_partition(&ds, 1, alpha, 4).unwrap();
            assert_eq!(p.client(0), (0..ds.len()).collect::<Vec<_>>().as_slice());
        }
    }

    #[test]
    fn partition_rejects_bad_arguments() {
        let ds = generate_blobs(2, 2, 5, 0.2, 1).unwrap();
        assert!(dirichlet_partition(&ds, 0, 1.0, 0).is_err());
        assert!(dirichlet_partition(&ds, 3, 0.0, 0).is_err());
        assert!(Partition::new(vec![vec![0, 1], vec![1]], 5).is_err());
        assert!(Partition::new(vec![vec![7]], 5).is_err());
    }

    #[test]
    fn eval_split_sizes() {
        let idx: Vec<usize> = (100..110).collect();
        let s = split_eval(&idx, 0.2, 5).unwrap();
        assert_eq!(s.indices.len(), 2);
        assert!(s.indices.iter().all(|i| idx.contains(i)));
        assert_eq!(s, split_eval(&idx, 0.2, 5).unwrap());

        let idx: Vec<usize> = (0..32).collect();
        assert_eq!(split_eval(&idx, 0.2, 1).unwrap().indices.len(), 6);

        assert!(split_eval(&[], 0.2, 1).unwrap().is_empty());
        assert!(split_eval(&idx, 1.0, 1).is_err());
        assert!(split_eval(&idx, 0.0, 1).is_err());
    }

    #[test]
    fn batches_cover_input() {
        let idx: Vec<usize> = (0..10).collect();
        let batches = batch_iter(&idx, 4, 3).unwrap();
        assert_eq!(
            batches.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![4, 4, 2]
        );
        let mut flat: Vec<usize> = batches.concat();
        flat.sort_unstable();
        assert_eq!(flat, idx);
        assert_eq!(batches, batch_iter(&idx, 4, 3).unwrap());
        assert_eq!(
            batch_iter(&idx, 4, batch_seed(1, 2, 3, 4)).unwrap(),
            batch_iter(&idx, 4, batch_seed(1, 2, 3, 4)).unwrap()
        );
        assert!(batch_iter(&idx, 0, 3).is_err());
    }
}

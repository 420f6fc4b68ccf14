//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "strategy": "fedcme", "k": 20, "m": 8, "t": 60,
//!   "dirichlet_alpha": 0.1, "seed": 1,
//!   "dataset": { "blobs": { "classes": 10, "dim": 20, "train_per_class": 200,
//!                           "test_per_class": 100, "spread": 1.0 } }
//! }
//! ```
//!
//! Unknown keys are rejected; errors name the offending key path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{dirichlet_partition, load_idx, BlobGenerator, DEFAULT_EVAL_FRACTION};
use crate::error::{Error, Result};
use crate::model::DEFAULT_HIDDEN;
use crate::seed::{derive_seed, Stream};
use crate::server::{AggregationWeighting, Federation, RunConfig, Variant};
use crate::strategy::ClientConfig;

/// Environment variable naming the default output directory for metrics.
pub const OUTPUT_DIR_ENV: &str = "FEDCME_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "results";

fn default_local_epochs() -> usize {
    6
}
fn default_batch_size() -> usize {
    32
}
fn default_lr() -> f64 {
    0.01
}
fn default_mu() -> f64 {
    0.01
}
fn default_alpha_rs() -> f64 {
    0.5
}
fn default_dirichlet_alpha() -> f64 {
    0.5
}
fn default_eval_fraction() -> f64 {
    DEFAULT_EVAL_FRACTION
}
fn default_idx_classes() -> usize {
    10
}
fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategy: Variant,
    pub k: usize,
    pub m: usize,
    pub t: usize,
    #[serde(default = "default_local_epochs")]
    pub local_epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_mu")]
    pub mu_prox: f64,
    #[serde(default = "default_alpha_rs")]
    pub alpha_rs: f64,
    #[serde(default = "default_dirichlet_alpha")]
    pub dirichlet_alpha: f64,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_fraction")]
    pub eval_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub aggregation: AggregationWeighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs(BlobsSpec),
    Idx(IdxSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobsSpec {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSpec {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    #[serde(default = "default_idx_classes")]
    pub classes: usize,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// A config with every optional key at its default.
    pub fn new(strategy: Variant, k: usize, m: usize, t: usize, dataset: DatasetSpec) -> Self {
        Self {
            strategy,
            k,
            m,
            t,
            local_epochs: default_local_epochs(),
            batch_size: default_batch_size(),
            lr: default_lr(),
            mu: default_mu(),
            mu_prox: default_mu(),
            alpha_rs: default_alpha_rs(),
            dirichlet_alpha: default_dirichlet_alpha(),
            dataset,
            seed: 0,
            eval_fraction: default_eval_fraction(),
            output_path: None,
            hidden: default_hidden(),
            aggregation: AggregationWeighting::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Semantic checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(config_err("k", "need at least one client"));
        }
        if self.m == 0 || self.m > self.k {
            return Err(config_err(
                "m",
                format!("must satisfy 1 <= m <= k = {}, got {}", self.k, self.m),
            ));
        }
        if self.t == 0 {
            return Err(config_err("t", "need at least one round"));
        }
        if self.local_epochs == 0 {
            return Err(config_err("local_epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be >= 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(config_err("lr", format!("must be > 0, got {}", self.lr)));
        }
        for (key, v) in [("mu", self.mu), ("mu_prox", self.mu_prox)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(key, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.alpha_rs > 0.0 && self.alpha_rs <= 1.0) {
            return Err(config_err(
                "alpha_rs",
                format!("must be in (0, 1], got {}", self.alpha_rs),
            ));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(config_err(
                "dirichlet_alpha",
                format!("must be > 0, got {}", self.dirichlet_alpha),
            ));
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return Err(config_err(
                "eval_fraction",
                format!("must be in (0, 1), got {}", self.eval_fraction),
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(config_err("hidden", "need one or more nonzero widths"));
        }
        match &self.dataset {
            DatasetSpec::Blobs(b) => {
                if b.classes < 2 {
                    return Err(config_err("dataset.blobs.classes", "must be >= 2"));
                }
                if b.dim < 2 {
                    return Err(config_err("dataset.blobs.dim", "must be >= 2"));
                }
                if b.test_per_class == 0 {
                    return Err(config_err("dataset.blobs.test_per_class", "must be >= 1"));
                }
                if !(b.spread >= 0.0 && b.spread.is_finite()) {
                    return Err(config_err("dataset.blobs.spread", "must be >= 0"));
                }
            }
            DatasetSpec::Idx(i) => {
                if i.classes == 0 || i.classes > 256 {
                    return Err(config_err("dataset.idx.classes", "must be in 1..=256"));
                }
            }
        }
        Ok(())
    }

    pub fn run_config(&self) -> RunConfig {
        let client = ClientConfig {
            lr: self.lr,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
            mu: self.mu,
            mu_prox: self.mu_prox,
            alpha_rs: self.alpha_rs,
            eval_fraction: self.eval_fraction,
            ..ClientConfig::default()
        };
        let mut run = RunConfig::new(self.strategy, self.k, self.m, self.t).with_client(client);
        run.aggregation = self.aggregation;
        run.hidden = self.hidden.clone();
        run.seed = self.seed;
        run
    }

    /// Loads or generates the data and partitions it across `k` clients.
    pub fn build_federation(&self) -> Result<Federation> {
        let (train, test) = match &self.dataset {
            DatasetSpec::Blobs(b) => {
                let gen = BlobGenerator::new(b.classes, b.dim, b.spread, self.seed)?;
                (
                    gen.sample(
                        b.train_per_class,
                        derive_seed(self.seed, Stream::Blobs, &[0]),
                    ),
                    gen.sample(
                        b.test_per_class,
                        derive_seed(self.seed, Stream::Blobs, &[1]),
                    ),
                )
            }
            DatasetSpec::Idx(i) => (
                load_idx(&i.train_images, &i.train_labels)?.with_num_classes(i.classes)?,
                load_idx(&i.test_images, &i.test_labels)?.with_num_classes(i.classes)?,
            ),
        };
        if train.dim() != test.dim() {
            return Err(Error::dim("train vs test width", train.dim(), test.dim()));
        }
        let partition = dirichlet_partition(&train, self.k, self.dirichlet_alpha, self.seed)?;
        Ok(Federation {
            train,
            partition,
            test,
        })
    }

    /// Configured `output_path`, or `<$FEDCME_OUTPUT_DIR>/<strategy>_seed<seed>.csv`.
    pub fn output_path(&self) -> PathBuf {
        match &self.output_path {
            Some(p) => p.clone(),
            None => {
                let dir = std::env::var_os(OUTPUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
                dir.join(format!("{}_seed{}.csv", self.strategy, self.seed))
            }
        }
    }

    /// Copy of this config for another seed, with the output file suffixed
    /// by the seed.
    pub fn for_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg.output_path = Some(match &self.output_path {
            Some(p) => seed_suffixed(p, seed),
            None => cfg.output_path(),
        });
        cfg
    }
}

fn seed_suffixed(path: &Path, seed: u64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}_seed{seed}"),
    };
    path.with_file_name(name)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    ExperimentConfig::from_json_str(&text)
}

/// Parses `seeds=a..b` (inclusive) into the list of seeds.
pub fn parse_sweep(spec: &str) -> Result<Vec<u64>> {
    let range = spec
        .strip_prefix("seeds=")
        .ok_or_else(|| config_err("--sweep", format!("expected `seeds=a..b`, got `{spec}`")))?;
    let (a, b) = range
        .split_once("..")
        .ok_or_else(|| config_err("--sweep", format!("expected `a..b`, got `{range}`")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|e| config_err("--sweep", format!("bad seed `{s}`: {e}")))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(config_err("--sweep", format!("empty seed range {a}..{b}")));
    }
    Ok((a..=b).collect())
}

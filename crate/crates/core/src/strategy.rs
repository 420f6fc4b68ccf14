//! Client-side local training for every supported strategy.
//!
//! FedAvg, FedProx and FedRS differ only in the per-batch objective. FedCME
//! splits local training in two phases around a classifier exchange, records
//! per-class features while training, optionally aligns them to the global
//! features, and finishes with a per-class self-evaluation.

use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{batch_iter, batch_seed, eval_seed, split_eval, Dataset, DEFAULT_EVAL_FRACTION};
use crate::error::{Error, Result};
use crate::model::{flatten, ParamVector, SplitModel};
use crate::nn::{
    l2_feature_loss, proximal_term, restricted_softmax_cross_entropy, sgd_step,
    softmax_cross_entropy, ClassFeatures,
};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    FedAvg,
    FedProx,
    FedRs,
    FedCme,
}

/// Which part of the model moves at the mid-training exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExchangeUnit {
    Classifier,
    Extractor,
    Whole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub strategy: Strategy,
    pub lr: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    /// Feature-alignment factor (FedCME).
    pub mu: f64,
    /// Proximal factor (FedProx).
    pub mu_prox: f64,
    /// Logit scale for locally missing classes (FedRS).
    pub alpha_rs: f64,
    pub exchange_enabled: bool,
    pub alignment_enabled: bool,
    pub exchange_unit: ExchangeUnit,
    pub eval_fraction: f64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::FedAvg,
            lr: 0.01,
            local_epochs: 6,
            batch_size: 32,
            mu: 0.01,
            mu_prox: 0.01,
            alpha_rs: 0.5,
            exchange_enabled: true,
            alignment_enabled: true,
            exchange_unit: ExchangeUnit::Classifier,
            eval_fraction: DEFAULT_EVAL_FRACTION,
        }
    }
}

impl ClientConfig {
    pub fn fedcme(mu: f64) -> Self {
        Self {
            strategy: Strategy::FedCme,
            mu,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: String| Err(Error::Validation(format!("{what} = {v}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0", self.lr.to_string());
        }
        if self.local_epochs == 0 {
            return bad("local_epochs must be >= 1", "0".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1", "0".into());
        }
        for (name, v) in [("mu", self.mu), ("mu_prox", self.mu_prox)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be >= 0"), v.to_string());
            }
        }
        if !(self.alpha_rs > 0.0 && self.alpha_rs <= 1.0) {
            return bad("alpha_rs must be in (0, 1]", self.alpha_rs.to_string());
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return bad(
                "eval_fraction must be in (0, 1)",
                self.eval_fraction.to_string(),
            );
        }
        Ok(())
    }

    /// Epoch after which the exchange happens: `⌊E/2⌋`.
    pub fn exchange_epoch(&self) -> usize {
        self.local_epochs / 2
    }

    fn alignment_weight(&self) -> Option<f64> {
        (self.strategy == Strategy::FedCme && self.alignment_enabled).then_some(self.mu)
    }
}

/// One client's view of the training data.
#[derive(Debug, Clone, Copy)]
pub struct ClientData<'a> {
    pub client: usize,
    pub dataset: &'a Dataset,
    pub indices: &'a [usize],
}

impl ClientData<'_> {
    pub fn class_counts(&self) -> Vec<usize> {
        self.dataset.class_counts(self.indices)
    }
}

/// Identifies the round a local update belongs to; drives all seeding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundContext {
    pub run_seed: u64,
    pub round: usize,
}

/// Running per-class sums of extracted features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAccumulator {
    sums: Vec<Vec<f64>>,
    present: Vec<bool>,
}

impl FeatureAccumulator {
    pub fn new(classes: usize, dim: usize) -> Self {
        Self {
            sums: vec![vec![0.0; dim]; classes],
            present: vec![false; classes],
        }
    }

    pub fn add(&mut self, features: &Tensor, labels: &[usize]) {
        for (b, &c) in labels.iter().enumerate() {
            self.present[c] = true;
            for (s, v) in self.sums[c].iter_mut().zip(features.row(b)) {
                *s += v;
            }
        }
    }

    pub fn sum(&self, class: usize) -> Option<&[f64]> {
        self.present[class].then(|| self.sums[class].as_slice())
    }

    /// Divides each present class by `epochs·|D_{k,c}|`; absent classes stay
    /// unset rather than zero.
    pub fn finalize(&self, epochs: usize, class_counts: &[usize]) -> Result<ClassFeatures> {
        let dim = self.sums.first().map_or(0, Vec::len);
        let mut out = ClassFeatures::unset(self.sums.len(), dim);
        for (c, sum) in self.sums.iter().enumerate() {
            if !self.present[c] {
                continue;
            }
            let count = class_counts.get(c).copied().unwrap_or(0);
            if count == 0 {
                return Err(Error::Validation(format!(
                    "class {c} has accumulated features but no samples"
                )));
            }
            let n = (epochs * count) as f64;
            out.set(c, sum.iter().map(|s| s / n).collect())?;
        }
        Ok(out)
    }
}

/// Model and accumulator between the two halves of a FedCME update.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub client: usize,
    pub model: SplitModel,
    pub accumulator: FeatureAccumulator,
    pub epochs_completed: usize,
    loss_sum: f64,
    batches: usize,
}

impl PhaseState {
    pub fn start(client: usize, model: SplitModel) -> Self {
        let accumulator = FeatureAccumulator::new(model.num_classes(), model.feature_dim());
        Self {
            client,
            model,
            accumulator,
            epochs_completed: 0,
            loss_sum: 0.0,
            batches: 0,
        }
    }

    pub fn mean_loss(&self) -> f64 {
        if self.batches == 0 {
            0.0
        } else {
            self.loss_sum / self.batches as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub client: usize,
    pub params: ParamVector,
    /// Per-class local features; `None` for strategies that do not record them.
    pub local_features: Option<ClassFeatures>,
    /// Per-class self-evaluation accuracy; `None` outside FedCME.
    pub eval_vector: Option<Vec<f64>>,
    pub sample_count: usize,
    pub train_loss: f64,
}

/// Per-batch objective terms on top of cross-entropy.
struct Objective<'a> {
    anchor: Option<(f64, &'a SplitModel)>,
    class_scale: Option<Vec<f64>>,
    alignment: Option<(f64, &'a ClassFeatures)>,
    record_features: bool,
}

fn train_epochs(
    state: &mut PhaseState,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
    epochs: Range<usize>,
    objective: &Objective<'_>,
) -> Result<()> {
    for epoch in epochs {
        let seed = batch_seed(ctx.run_seed, data.client, ctx.round, epoch);
        for batch in batch_iter(data.indices, cfg.batch_size, seed)? {
            let (x, y) = data.dataset.batch(&batch);
            let model = &mut state.model;
            let cache = model.forward_train(&x)?;
            if objective.record_features {
                state.accumulator.add(&cache.features, &y);
            }

            let (mut loss, dlogits) = match &objective.class_scale {
                Some(scale) => restricted_softmax_cross_entropy(&cache.logits, &y, scale)?,
                None => softmax_cross_entropy(&cache.logits, &y)?,
            };
            let dfeatures = match objective.alignment {
                Some((mu, global)) => {
                    let (l2, mut g) = l2_feature_loss(&cache.features, &y, global)?;
                    loss += mu * l2;
                    g.data_mut().iter_mut().for_each(|v| *v *= mu);
                    Some(g)
                }
                None => None,
            };
            let mut grads = model.backward(&cache, &dlogits, dfeatures.as_ref())?;
            if let Some((mu_prox, anchor)) = objective.anchor {
                let (prox, g) = proximal_term(&model.parameters(), &anchor.parameters(), mu_prox)?;
                loss += prox;
                grads.add_scaled(&g, 1.0)?;
            }
            sgd_step(model.parameters_mut(), &grads, cfg.lr)?;
            state.loss_sum += loss;
            state.batches += 1;
        }
        state.epochs_completed += 1;
    }
    Ok(())
}

fn require_data(data: &ClientData<'_>) -> Result<()> {
    if data.indices.is_empty() {
        Err(Error::EmptyClient {
            client: data.client,
        })
    } else {
        Ok(())
    }
}

fn baseline_result(state: PhaseState, data: &ClientData<'_>) -> LocalResult {
    LocalResult {
        client: data.client,
        params: flatten(&state.model),
        local_features: None,
        eval_vector: None,
        sample_count: data.indices.len(),
        train_loss: state.mean_loss(),
    }
}

fn plain_objective<'a>() -> Objective<'a> {
    Objective {
        anchor: None,
        class_scale: None,
        alignment: None,
        record_features: false,
    }
}

/// E epochs of mini-batch SGD on cross-entropy.
pub fn local_update_fedavg(
    global: &SplitModel,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
) -> Result<LocalResult> {
    require_data(data)?;
    let mut state = PhaseState::start(data.client, global.clone());
    train_epochs(
        &mut state,
        data,
        cfg,
        ctx,
        0..cfg.local_epochs,
        &plain_objective(),
    )?;
    Ok(baseline_result(state, data))
}

/// FedAvg plus the proximal pull `(μ/2)‖w − w_global‖²`.
pub fn local_update_fedprox(
    global: &SplitModel,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
) -> Result<LocalResult> {
    require_data(data)?;
    let objective = Objective {
        anchor: Some((cfg.mu_prox, global)),
        ..plain_objective()
    };
    let mut state = PhaseState::start(data.client, global.clone());
    train_epochs(&mut state, data, cfg, ctx, 0..cfg.local_epochs, &objective)?;
    Ok(baseline_result(state, data))
}

/// Logit scale per class: `alpha_rs` for classes the client never sees.
pub fn restricted_class_scale(class_counts: &[usize], alpha_rs: f64) -> Vec<f64> {
    class_counts
        .iter()
        .map(|&n| if n == 0 { alpha_rs } else { 1.0 })
        .collect()
}

/// FedAvg with a restricted softmax over locally missing classes.
pub fn local_update_fedrs(
    global: &SplitModel,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
) -> Result<LocalResult> {
    require_data(data)?;
    let objective = Objective {
        class_scale: Some(restricted_class_scale(&data.class_counts(), cfg.alpha_rs)),
        ..plain_objective()
    };
    let mut state = PhaseState::start(data.client, global.clone());
    train_epochs(&mut state, data, cfg, ctx, 0..cfg.local_epochs, &objective)?;
    Ok(baseline_result(state, data))
}

/// Runs FedCME local training over `epochs`, recording features and adding
/// the alignment loss when enabled.
pub fn fedcme_phase(
    state: &mut PhaseState,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
    global_features: &ClassFeatures,
    epochs: Range<usize>,
) -> Result<()> {
    if epochs.is_empty() {
        warn!(
            "client {}: empty local epoch range {:?}, nothing to train",
            data.client, epochs
        );
        return Ok(());
    }
    let objective = Objective {
        alignment: cfg.alignment_weight().map(|mu| (mu, global_features)),
        record_features: true,
        ..plain_objective()
    };
    train_epochs(state, data, cfg, ctx, epochs, &objective)
}

/// Per-class accuracy on `eval_indices`; classes absent from the subset get 0.
pub fn evaluate_vector(
    model: &SplitModel,
    dataset: &Dataset,
    eval_indices: &[usize],
) -> Result<Vec<f64>> {
    let classes = model.num_classes();
    let mut correct = vec![0usize; classes];
    let mut total = vec![0usize; classes];
    if !eval_indices.is_empty() {
        let (x, y) = dataset.batch(eval_indices);
        for (pred, label) in model.predict(&x)?.into_iter().zip(y) {
            total[label] += 1;
            if pred == label {
                correct[label] += 1;
            }
        }
    }
    Ok(correct
        .iter()
        .zip(&total)
        .map(|(&ok, &n)| if n == 0 { 0.0 } else { ok as f64 / n as f64 })
        .collect())
}

/// First half of a FedCME update: epochs `[0, ⌊E/2⌋)` from the global model.
pub fn fedcme_begin(
    global: &SplitModel,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
    global_features: &ClassFeatures,
) -> Result<PhaseState> {
    require_data(data)?;
    let mut state = PhaseState::start(data.client, global.clone());
    fedcme_phase(
        &mut state,
        data,
        cfg,
        ctx,
        global_features,
        0..cfg.exchange_epoch(),
    )?;
    Ok(state)
}

/// Second half of a FedCME update after the exchange barrier: remaining
/// epochs, feature finalisation and self-evaluation on a fresh subset.
pub fn fedcme_finish(
    mut state: PhaseState,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
    global_features: &ClassFeatures,
) -> Result<LocalResult> {
    if state.epochs_completed != cfg.exchange_epoch() {
        return Err(Error::Protocol(format!(
            "client {} reached the barrier after {} epochs, expected {}",
            data.client,
            state.epochs_completed,
            cfg.exchange_epoch()
        )));
    }
    fedcme_phase(
        &mut state,
        data,
        cfg,
        ctx,
        global_features,
        cfg.exchange_epoch()..cfg.local_epochs,
    )?;
    let local_features = state
        .accumulator
        .finalize(cfg.local_epochs, &data.class_counts())?;
    let eval = split_eval(
        data.indices,
        cfg.eval_fraction,
        eval_seed(ctx.run_seed, data.client, ctx.round),
    )?;
    let eval_vector = evaluate_vector(&state.model, data.dataset, &eval.indices)?;
    Ok(LocalResult {
        client: data.client,
        params: flatten(&state.model),
        local_features: Some(local_features),
        eval_vector: Some(eval_vector),
        sample_count: data.indices.len(),
        train_loss: state.mean_loss(),
    })
}

/// Full single-client FedCME update. `exchange` is called once with the
/// mid-training model; pass a no-op when the client has no counterpart.
pub fn local_update_fedcme<F>(
    global: &SplitModel,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
    global_features: &ClassFeatures,
    mut exchange: F,
) -> Result<LocalResult>
where
    F: FnMut(&mut SplitModel) -> Result<()>,
{
    let mut state = fedcme_begin(global, data, cfg, ctx, global_features)?;
    if cfg.exchange_enabled {
        exchange(&mut state.model)?;
    }
    fedcme_finish(state, data, cfg, ctx, global_features)
}

/// Local update without any exchange, dispatched on `cfg.strategy`.
pub fn local_update(
    global: &SplitModel,
    data: &ClientData<'_>,
    cfg: &ClientConfig,
    ctx: RoundContext,
    global_features: &ClassFeatures,
) -> Result<LocalResult> {
    match cfg.strategy {
        Strategy::FedAvg => local_update_fedavg(global, data, cfg, ctx),
        Strategy::FedProx => local_update_fedprox(global, data, cfg, ctx),
        Strategy::FedRs => local_update_fedrs(global, data, cfg, ctx),
        Strategy::FedCme => {
            local_update_fedcme(global, data, cfg, ctx, global_features, |_| Ok(()))
        }
    }
}

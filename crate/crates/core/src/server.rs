//! The server side: client selection, evaluation-vector matching, the
//! mid-training exchange barrier, aggregation and the round loop.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::model::{
    argmax, swap_classifiers, swap_extractors, swap_whole, unflatten, ParamVector, SplitModel,
    DEFAULT_HIDDEN,
};
use crate::nn::ClassFeatures;
use crate::seed::{rng_for, Stream};
use crate::strategy::{
    fedcme_begin, fedcme_finish, local_update, ClientConfig, ClientData, ExchangeUnit, LocalResult,
    PhaseState, RoundContext, Strategy,
};

/// Named algorithm variants, including the FedCME ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedprox")]
    FedProx,
    #[serde(rename = "fedrs")]
    FedRs,
    #[serde(rename = "fedcme")]
    FedCme,
    /// Alignment only, no exchange.
    #[serde(rename = "fedcme-ol")]
    FedCmeOl,
    /// Exchange only, no alignment.
    #[serde(rename = "fedcme-oe")]
    FedCmeOe,
    /// Many-to-one matching.
    #[serde(rename = "fedcme-mto")]
    FedCmeMto,
    /// Whole-model exchange.
    #[serde(rename = "fedcme-wm")]
    FedCmeWm,
    /// Extractor-only exchange.
    #[serde(rename = "fedcme-fe")]
    FedCmeFe,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::FedAvg,
        Variant::FedProx,
        Variant::FedRs,
        Variant::FedCme,
        Variant::FedCmeOl,
        Variant::FedCmeOe,
        Variant::FedCmeMto,
        Variant::FedCmeWm,
        Variant::FedCmeFe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::FedAvg => "fedavg",
            Variant::FedProx => "fedprox",
            Variant::FedRs => "fedrs",
            Variant::FedCme => "fedcme",
            Variant::FedCmeOl => "fedcme-ol",
            Variant::FedCmeOe => "fedcme-oe",
            Variant::FedCmeMto => "fedcme-mto",
            Variant::FedCmeWm => "fedcme-wm",
            Variant::FedCmeFe => "fedcme-fe",
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Variant::FedAvg => Strategy::FedAvg,
            Variant::FedProx => Strategy::FedProx,
            Variant::FedRs => Strategy::FedRs,
            _ => Strategy::FedCme,
        }
    }

    /// Sets the strategy and ablation switches of `cfg` for this variant.
    pub fn configure(self, cfg: &mut ClientConfig) -> MatchingMode {
        cfg.strategy = self.strategy();
        cfg.exchange_enabled = self != Variant::FedCmeOl;
        cfg.alignment_enabled = self != Variant::FedCmeOe;
        cfg.exchange_unit = match self {
            Variant::FedCmeWm => ExchangeUnit::Whole,
            Variant::FedCmeFe => ExchangeUnit::Extractor,
            _ => ExchangeUnit::Classifier,
        };
        if self == Variant::FedCmeMto {
            MatchingMode::ManyToOne
        } else {
            MatchingMode::Pairwise
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchingMode {
    Pairwise,
    ManyToOne,
}

/// Denominator of the weighted model average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationWeighting {
    /// `D_k / Σ_{j selected} D_j`; weights sum to one.
    #[default]
    Selected,
    /// `D_k / D` with `D` the whole federation's sample count.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub num_clients: usize,
    pub clients_per_round: usize,
    pub rounds: usize,
    pub client: ClientConfig,
    pub matching: MatchingMode,
    pub aggregation: AggregationWeighting,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for every knob not passed explicitly; switches follow `variant`.
    pub fn new(
        variant: Variant,
        num_clients: usize,
        clients_per_round: usize,
        rounds: usize,
    ) -> Self {
        let mut client = ClientConfig::default();
        let matching = variant.configure(&mut client);
        Self {
            variant,
            num_clients,
            clients_per_round,
            rounds,
            client,
            matching,
            aggregation: AggregationWeighting::Selected,
            hidden: DEFAULT_HIDDEN.to_vec(),
            seed: 0,
        }
    }

    /// Re-applies the variant switches after `client` was replaced.
    pub fn with_client(mut self, client: ClientConfig) -> Self {
        self.client = client;
        self.matching = self.variant.configure(&mut self.client);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0
            || self.clients_per_round == 0
            || self.clients_per_round > self.num_clients
        {
            return Err(Error::Validation(format!(
                "need 1 <= m <= k, got m = {} and k = {}",
                self.clients_per_round, self.num_clients
            )));
        }
        if self.rounds == 0 {
            return Err(Error::Validation("need at least one round".into()));
        }
        self.client.validate()
    }
}

/// Uniform draw of `m` distinct clients from `eligible`, sorted by id.
pub fn select_clients(
    eligible: &[usize],
    m: usize,
    run_seed: u64,
    round: usize,
) -> Result<Vec<usize>> {
    if m > eligible.len() {
        return Err(Error::Validation(format!(
            "cannot select {m} clients from {} eligible",
            eligible.len()
        )));
    }
    let mut rng = rng_for(run_seed, Stream::Selection, &[round as u64]);
    let mut chosen: Vec<usize> = index::sample(&mut rng, eligible.len(), m)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dim("cosine_similarity", u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Counterpart assignment for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchPlan {
    pub mode: MatchingMode,
    /// Client → the client whose model part it receives.
    pub counterpart: BTreeMap<usize, usize>,
    /// Selected clients that train without an exchange.
    pub unmatched: Vec<usize>,
}

impl MatchPlan {
    pub fn counterpart_of(&self, client: usize) -> Option<usize> {
        self.counterpart.get(&client).copied()
    }

    /// Matched pairs `(a, b)` with `a < b` (pairwise mode).
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.counterpart
            .iter()
            .filter(|(a, b)| a < b)
            .map(|(&a, &b)| (a, b))
            .collect()
    }
}

/// Per-client evaluation vectors; never-reported clients hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    vectors: Vec<Vec<f64>>,
    reported: Vec<bool>,
}

impl EvalTable {
    pub fn new(clients: usize, classes: usize) -> Self {
        Self {
            vectors: vec![vec![0.0; classes]; clients],
            reported: vec![false; clients],
        }
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn get(&self, client: usize) -> &[f64] {
        &self.vectors[client]
    }

    pub fn has_reported(&self, client: usize) -> bool {
        self.reported[client]
    }

    pub fn record(&mut self, client: usize, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.vectors[client].len() {
            return Err(Error::dim(
                "evaluation vector",
                self.vectors[client].len(),
                vector.len(),
            ));
        }
        self.vectors[client] = vector;
        self.reported[client] = true;
        Ok(())
    }
}

/// Similarities closer than this are ties, so that mathematically equal
/// cosines (parallel or duplicate vectors) fall back to the client id.
const SIMILARITY_RESOLUTION: f64 = 1e-12;

fn similarity_key(u: &[f64], v: &[f64]) -> Result<i64> {
    Ok((cosine_similarity(u, v)? / SIMILARITY_RESOLUTION).round() as i64)
}

fn similarity_order(selected: &[usize], vectors: &[Vec<f64>]) -> Result<Vec<usize>> {
    let dim = vectors.get(selected[0]).map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    for &k in selected {
        for (m, v) in mean.iter_mut().zip(&vectors[k]) {
            *m += v / selected.len() as f64;
        }
    }
    let mut keyed = Vec::with_capacity(selected.len());
    for &k in selected {
        keyed.push((similarity_key(&vectors[k], &mean)?, k));
    }
    keyed.sort_unstable();
    Ok(keyed.into_iter().map(|(_, k)| k).collect())
}

/// Greedy pairing of the most dissimilar evaluation vectors.
///
/// Clients are ordered by ascending similarity to the mean vector; the head
/// of the queue is paired with the remaining client least similar to it.
/// Ties go to the lower client id. With an odd count the last client is left
/// unmatched.
pub fn make_matching(selected: &[usize], vectors: &[Vec<f64>]) -> Result<MatchPlan> {
    if selected.is_empty() {
        return Err(Error::Validation(
            "matching needs at least one client".into(),
        ));
    }
    let mut queue = similarity_order(selected, vectors)?;
    let mut counterpart = BTreeMap::new();
    let mut unmatched = Vec::new();
    while !queue.is_empty() {
        let k = queue.remove(0);
        let mut best: Option<(i64, usize, usize)> = None;
        for (pos, &j) in queue.iter().enumerate() {
            let s = similarity_key(&vectors[k], &vectors[j])?;
            let better = match best {
                None => true,
                Some((bs, bj, _)) => s < bs || (s == bs && j < bj),
            };
            if better {
                best = Some((s, j, pos));
            }
        }
        match best {
            Some((_, j, pos)) => {
                queue.remove(pos);
                counterpart.insert(k, j);
                counterpart.insert(j, k);
            }
            None => unmatched.push(k),
        }
    }
    Ok(MatchPlan {
        mode: MatchingMode::Pairwise,
        counterpart,
        unmatched,
    })
}

/// Every client independently takes the least similar other selected
/// client; one client may serve several.
pub fn make_matching_many_to_one(selected: &[usize], vectors: &[Vec<f64>]) -> Result<MatchPlan> {
    if selected.is_empty() {
        return Err(Error::Validation(
            "matching needs at least one client".into(),
        ));
    }
    let mut counterpart = BTreeMap::new();
    let mut unmatched = Vec::new();
    for &k in selected {
        let mut best: Option<(i64, usize)> = None;
        for &j in selected.iter().filter(|&&j| j != k) {
            let s = similarity_key(&vectors[k], &vectors[j])?;
            if best.is_none_or(|(bs, bj)| s < bs || (s == bs && j < bj)) {
                best = Some((s, j));
            }
        }
        match best {
            Some((_, j)) => {
                counterpart.insert(k, j);
            }
            None => unmatched.push(k),
        }
    }
    Ok(MatchPlan {
        mode: MatchingMode::ManyToOne,
        counterpart,
        unmatched,
    })
}

fn exchange_pair(a: &mut SplitModel, b: &mut SplitModel, unit: ExchangeUnit) -> Result<()> {
    match unit {
        ExchangeUnit::Classifier => swap_classifiers(a, b),
        ExchangeUnit::Extractor => swap_extractors(a, b),
        ExchangeUnit::Whole => swap_whole(a, b),
    }
}

/// Performs the mid-training exchange for every phase-one state in place.
///
/// Pairwise plans swap parts between counterparts. Many-to-one plans copy
/// each counterpart's part from a snapshot taken before any copy.
pub fn apply_exchange(
    plan: &MatchPlan,
    states: &mut [PhaseState],
    unit: ExchangeUnit,
) -> Result<()> {
    let position: BTreeMap<usize, usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.client, i))
        .collect();
    let locate = |client: usize| {
        position
            .get(&client)
            .copied()
            .ok_or_else(|| Error::Protocol(format!("client {client} never reached the barrier")))
    };
    match plan.mode {
        MatchingMode::Pairwise => {
            for (a, b) in plan.pairs() {
                let (i, j) = (locate(a)?, locate(b)?);
                let (lo, hi) = (i.min(j), i.max(j));
                let (head, tail) = states.split_at_mut(hi);
                exchange_pair(&mut head[lo].model, &mut tail[0].model, unit)?;
            }
        }
        MatchingMode::ManyToOne => {
            let snapshot: Vec<SplitModel> = states.iter().map(|s| s.model.clone()).collect();
            for (&k, &j) in &plan.counterpart {
                let mut donor = snapshot[locate(j)?].clone();
                exchange_pair(&mut states[locate(k)?].model, &mut donor, unit)?;
            }
        }
    }
    Ok(())
}

/// Aggregation weights of the selected clients' sample counts.
pub fn aggregation_weights(
    sizes: &[usize],
    weighting: AggregationWeighting,
    federation_total: usize,
) -> Vec<f64> {
    let denom = match weighting {
        AggregationWeighting::Selected => sizes.iter().sum::<usize>(),
        AggregationWeighting::Global => federation_total,
    } as f64;
    sizes.iter().map(|&d| d as f64 / denom).collect()
}

/// Sample-weighted average of the local models.
///
/// The selected-client weighting is computed as a running weighted mean, so
/// identical inputs come back bit-identical.
pub fn aggregate_models(
    results: &[LocalResult],
    weighting: AggregationWeighting,
    federation_total: usize,
) -> Result<ParamVector> {
    let first = results
        .first()
        .ok_or_else(|| Error::Validation("nothing to aggregate".into()))?;
    if results
        .iter()
        .any(|r| r.params.layout() != first.params.layout())
    {
        return Err(Error::Validation(
            "local models have different layouts".into(),
        ));
    }
    let mut out = first.params.clone();
    match weighting {
        AggregationWeighting::Selected => {
            let mut seen = first.sample_count as f64;
            for r in &results[1..] {
                let d = r.sample_count as f64;
                seen += d;
                let w = d / seen;
                for (m, v) in out.values_mut().iter_mut().zip(r.params.values()) {
                    *m += w * (v - *m);
                }
            }
        }
        AggregationWeighting::Global => {
            let sizes: Vec<usize> = results.iter().map(|r| r.sample_count).collect();
            let weights = aggregation_weights(&sizes, weighting, federation_total);
            out.values_mut().fill(0.0);
            for (r, w) in results.iter().zip(weights) {
                for (m, v) in out.values_mut().iter_mut().zip(r.params.values()) {
                    *m += w * v;
                }
            }
        }
    }
    Ok(out)
}

/// New global features from the clients' local features.
///
/// A class a client did not see takes the current global entry before
/// averaging. Classes nobody has ever seen stay unset; while a class is unset
/// globally, only clients that saw it contribute.
pub fn aggregate_features(
    results: &[LocalResult],
    global: &ClassFeatures,
) -> Result<ClassFeatures> {
    let mut out = global.clone();
    for c in 0..global.num_classes() {
        let mut mean: Option<Vec<f64>> = None;
        let mut n = 0usize;
        for r in results {
            let Some(local) = &r.local_features else {
                continue;
            };
            if local.dim() != global.dim() || local.num_classes() != global.num_classes() {
                return Err(Error::Validation(format!(
                    "client {} reported features of shape {}x{}, expected {}x{}",
                    r.client,
                    local.num_classes(),
                    local.dim(),
                    global.num_classes(),
                    global.dim()
                )));
            }
            let Some(value) = local.get(c).or_else(|| global.get(c)) else {
                continue;
            };
            n += 1;
            match &mut mean {
                None => mean = Some(value.to_vec()),
                Some(m) => {
                    for (a, v) in m.iter_mut().zip(value) {
                        *a += (v - *a) / n as f64;
                    }
                }
            }
        }
        if let Some(m) = mean {
            out.set(c, m)?;
        }
    }
    Ok(out)
}

/// Fraction of argmax-correct predictions.
pub fn evaluate_global(model: &SplitModel, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Validation("empty test set".into()));
    }
    let logits = model.forward(test.features())?;
    let correct = (0..logits.rows())
        .filter(|&r| argmax(logits.row(r)) == test.labels()[r])
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Training data split across clients plus a held-out test set.
#[derive(Debug, Clone)]
pub struct Federation {
    pub train: Dataset,
    pub partition: Partition,
    pub test: Dataset,
}

impl Federation {
    pub fn client_data(&self, client: usize) -> ClientData<'_> {
        ClientData {
            client,
            dataset: &self.train,
            indices: self.partition.client(client),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    pub round: usize,
    pub model: SplitModel,
    pub features: ClassFeatures,
    pub eval_table: EvalTable,
}

impl GlobalState {
    pub fn new(model: SplitModel, num_clients: usize) -> Self {
        let features = ClassFeatures::unset(model.num_classes(), model.feature_dim());
        let eval_table = EvalTable::new(num_clients, model.num_classes());
        Self {
            round: 0,
            model,
            features,
            eval_table,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub state: GlobalState,
    pub selected: Vec<usize>,
    pub plan: Option<MatchPlan>,
    pub results: Vec<LocalResult>,
    pub mean_train_loss: f64,
}

fn par_map<I, T, F>(pool: Option<&rayon::ThreadPool>, items: Vec<I>, f: F) -> Result<Vec<T>>
where
    I: Send,
    T: Send,
    F: Fn(I) -> Result<T> + Sync + Send,
{
    // collect() keeps input order, so reductions stay in client-id order
    match pool {
        Some(pool) => pool.install(|| items.into_par_iter().map(&f).collect()),
        None => items.into_iter().map(f).collect(),
    }
}

fn run_exchange_round(
    state: &GlobalState,
    fed: &Federation,
    cfg: &RunConfig,
    ctx: RoundContext,
    selected: &[usize],
    plan: &MatchPlan,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Vec<LocalResult>> {
    let mut phase_one = par_map(pool, selected.to_vec(), |k| {
        fedcme_begin(
            &state.model,
            &fed.client_data(k),
            &cfg.client,
            ctx,
            &state.features,
        )
    })?;
    apply_exchange(plan, &mut phase_one, cfg.client.exchange_unit)?;
    par_map(pool, phase_one, |s| {
        let data = fed.client_data(s.client);
        fedcme_finish(s, &data, &cfg.client, ctx, &state.features)
    })
}

/// One full round: select, match, train (with the exchange barrier for
/// FedCME), aggregate. Any failure leaves `state` untouched.
pub fn run_round(
    state: &GlobalState,
    fed: &Federation,
    cfg: &RunConfig,
    pool: Option<&rayon::ThreadPool>,
) -> Result<RoundOutcome> {
    let ctx = RoundContext {
        run_seed: cfg.seed,
        round: state.round,
    };
    let eligible = fed.partition.nonempty_clients();
    let selected = select_clients(&eligible, cfg.clients_per_round, cfg.seed, state.round)?;
    let is_cme = cfg.client.strategy == Strategy::FedCme;

    let plan = if is_cme && cfg.client.exchange_enabled {
        Some(match cfg.matching {
            MatchingMode::Pairwise => make_matching(&selected, state.eval_table.vectors())?,
            MatchingMode::ManyToOne => {
                make_matching_many_to_one(&selected, state.eval_table.vectors())?
            }
        })
    } else {
        None
    };

    let results = match &plan {
        Some(plan) => run_exchange_round(state, fed, cfg, ctx, &selected, plan, pool)?,
        None => par_map(pool, selected.clone(), |k| {
            local_update(
                &state.model,
                &fed.client_data(k),
                &cfg.client,
                ctx,
                &state.features,
            )
        })?,
    };

    let params = aggregate_models(&results, cfg.aggregation, fed.partition.total())?;
    let mut next = GlobalState {
        round: state.round + 1,
        model: unflatten(&params, &state.model)?,
        features: state.features.clone(),
        eval_table: state.eval_table.clone(),
    };
    if is_cme {
        for r in &results {
            if let Some(v) = &r.eval_vector {
                next.eval_table.record(r.client, v.clone())?;
            }
        }
        next.features = aggregate_features(&results, &state.features)?;
    }
    let mean_train_loss = results.iter().map(|r| r.train_loss).sum::<f64>() / results.len() as f64;
    Ok(RoundOutcome {
        state: next,
        selected,
        plan,
        results,
        mean_train_loss,
    })
}

/// Per-round metrics produced by [`Simulation::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// 1-based index of the completed round.
    pub round: usize,
    pub test_accuracy: f64,
    pub mean_train_loss: f64,
    pub wall_ms: u128,
    pub selected: Vec<usize>,
    pub plan: Option<MatchPlan>,
}

/// Owns the global state of a run and advances it round by round.
pub struct Simulation {
    cfg: RunConfig,
    fed: Federation,
    state: GlobalState,
    pool: Option<rayon::ThreadPool>,
}

impl Simulation {
    /// Initialises the global model from the run seed.
    pub fn new(cfg: RunConfig, fed: Federation) -> Result<Self> {
        let mut rng = rng_for(cfg.seed, Stream::ModelInit, &[]);
        let model = SplitModel::init(
            fed.train.dim(),
            &cfg.hidden,
            fed.train.num_classes(),
            &mut rng,
        )?;
        Self::with_model(cfg, fed, model)
    }

    pub fn with_model(cfg: RunConfig, fed: Federation, model: SplitModel) -> Result<Self> {
        cfg.validate()?;
        if fed.partition.num_clients() != cfg.num_clients {
            return Err(Error::Validation(format!(
                "partition has {} clients, config expects {}",
                fed.partition.num_clients(),
                cfg.num_clients
            )));
        }
        if model.input_dim() != fed.train.dim() || model.num_classes() != fed.train.num_classes() {
            return Err(Error::dim(
                "model vs dataset",
                format!("{} -> {}", fed.train.dim(), fed.train.num_classes()),
                format!("{} -> {}", model.input_dim(), model.num_classes()),
            ));
        }
        let state = GlobalState::new(model, cfg.num_clients);
        Ok(Self {
            cfg,
            fed,
            state,
            pool: None,
        })
    }

    /// Runs client updates on `workers` threads; results do not depend on it.
    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        self.pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Validation(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(self)
    }

    pub fn state(&self) -> &GlobalState {
        &self.state
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn federation(&self) -> &Federation {
        &self.fed
    }

    pub fn is_finished(&self) -> bool {
        self.state.round >= self.cfg.rounds
    }

    pub fn step(&mut self) -> Result<RoundReport> {
        let started = Instant::now();
        let outcome = run_round(&self.state, &self.fed, &self.cfg, self.pool.as_ref())?;
        let test_accuracy = evaluate_global(&outcome.state.model, &self.fed.test)?;
        self.state = outcome.state;
        Ok(RoundReport {
            round: self.state.round,
            test_accuracy,
            mean_train_loss: outcome.mean_train_loss,
            wall_ms: started.elapsed().as_millis(),
            selected: outcome.selected,
            plan: outcome.plan,
        })
    }

    /// Runs the remaining rounds, handing each report to `observer`.
    pub fn run<F: FnMut(&RoundReport)>(&mut self, mut observer: F) -> Result<Vec<RoundReport>> {
        let mut reports = Vec::with_capacity(self.cfg.rounds);
        while !self.is_finished() {
            let report = self.step()?;
            observer(&report);
            reports.push(report);
        }
        Ok(reports)
    }
}

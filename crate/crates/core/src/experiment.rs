//! Running configured experiments end to end and persisting their metrics.

use log::info;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::{MetricsRecord, MetricsWriter, RunSummary};
use crate::server::Simulation;

/// Runs all rounds of `cfg`, writing one CSV row per round.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<RunSummary> {
    let fed = cfg.build_federation()?;
    let mut sim = Simulation::new(cfg.run_config(), fed)?.with_workers(workers)?;
    let output = cfg.output_path();
    let mut writer = MetricsWriter::create(&output)?;
    let strategy = cfg.strategy.to_string();
    let mut final_accuracy = 0.0;
    let mut failure = None;
    sim.run(|report| {
        if failure.is_some() {
            return;
        }
        info!(
            "{strategy} seed {} round {}: acc {:.4} loss {:.4}",
            cfg.seed, report.round, report.test_accuracy, report.mean_train_loss
        );
        final_accuracy = report.test_accuracy;
        let record = MetricsRecord {
            round: report.round,
            test_acc: report.test_accuracy,
            mean_train_loss: report.mean_train_loss,
            wall_ms: report.wall_ms,
            strategy: strategy.clone(),
            seed: cfg.seed,
        };
        if let Err(e) = writer.write(&record) {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunSummary {
        strategy,
        seed: cfg.seed,
        rounds: cfg.t,
        final_accuracy,
        output,
    })
}

/// Runs `cfg` once per seed, each into its own seed-suffixed file.
pub fn run_sweep(cfg: &ExperimentConfig, seeds: &[u64], workers: usize) -> Result<Vec<RunSummary>> {
    seeds
        .iter()
        .map(|&seed| run_experiment(&cfg.for_seed(seed), workers))
        .collect()
}

//! Final test accuracy of several strategies over a range of seeds on
//! Dirichlet-split blobs.
//!
//! ```text
//! cargo run --release --example strategy_sweep -- [spread] [seeds] [rounds] [variants]
//! cargo run --release --example strategy_sweep -- 1.0 5 60 fedavg,fedcme,fedcme-oe,fedcme-ol
//! ```

use std::time::Instant;

use fedcme::config::{BlobsSpec, DatasetSpec, ExperimentConfig};
use fedcme::{Result, Simulation, Variant};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let spread: f64 = args.first().map_or(Ok(1.0), |s| s.parse()).expect("spread");
    let seeds: u64 = args
        .get(1)
        .map_or(Ok(5), |s| s.parse())
        .expect("seed count");
    let rounds: usize = args.get(2).map_or(Ok(60), |s| s.parse()).expect("rounds");
    let variants: Vec<Variant> = args
        .get(3)
        .map_or("fedavg,fedprox,fedrs,fedcme", String::as_str)
        .split(',')
        .map(str::parse)
        .collect::<Result<_>>()?;

    let dataset = DatasetSpec::Blobs(BlobsSpec {
        classes: 10,
        dim: 20,
        train_per_class: 200,
        test_per_class: 100,
        spread,
    });
    println!(
        "{:<12} {}",
        "strategy",
        (0..seeds)
            .map(|s| format!("seed{s:<4}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    for variant in variants {
        let started = Instant::now();
        let mut finals = Vec::new();
        for seed in 0..seeds {
            let mut cfg = ExperimentConfig::new(variant, 20, 8, rounds, dataset.clone());
            cfg.dirichlet_alpha = 0.1;
            cfg.seed = seed;
            let mut sim =
                Simulation::new(cfg.run_config(), cfg.build_federation()?)?.with_workers(4)?;
            let reports = sim.run(|_| {})?;
            finals.push(reports.last().map_or(0.0, |r| r.test_accuracy));
        }
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!(
            "{:<12} {}  mean {:.2}  ({:.1}s)",
            variant.as_str(),
            finals
                .iter()
                .map(|a| format!("{:>8.2}", 100.0 * a))
                .collect::<Vec<_>>()
                .join(" "),
            100.0 * mean,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

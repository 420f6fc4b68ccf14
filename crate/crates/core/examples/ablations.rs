//! All FedCME variants and baselines side by side on one seed.

use fedcme::config::{BlobsSpec, DatasetSpec, ExperimentConfig};
use fedcme::{Result, Simulation, Variant};

fn main() -> Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map_or(0, |s| s.parse().expect("seed"));
    for variant in Variant::ALL {
        let mut cfg = ExperimentConfig::new(
            variant,
            20,
            8,
            40,
            DatasetSpec::Blobs(BlobsSpec {
                classes: 10,
                dim: 20,
                train_per_class: 200,
                test_per_class: 100,
                spread: 1.0,
            }),
        );
        cfg.dirichlet_alpha = 0.1;
        cfg.seed = seed;
        let mut sim =
            Simulation::new(cfg.run_config(), cfg.build_federation()?)?.with_workers(4)?;
        let reports = sim.run(|_| {})?;
        let last = reports.last().expect("at least one round");
        println!(
            "{:<11} final acc {:.3}  loss {:.4}",
            variant.as_str(),
            last.test_accuracy,
            last.mean_train_loss
        );
    }
    Ok(())
}

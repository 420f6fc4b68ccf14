//! FedCME on Dirichlet-split Gaussian blobs, printing one line per round.
//!
//! ```text
//! cargo run --release --example quickstart
//! ```

use fedcme::config::{BlobsSpec, DatasetSpec, ExperimentConfig};
use fedcme::{Result, Simulation, Variant};

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::new(
        Variant::FedCme,
        20,
        8,
        30,
        DatasetSpec::Blobs(BlobsSpec {
            classes: 10,
            dim: 20,
            train_per_class: 200,
            test_per_class: 100,
            spread: 1.0,
        }),
    );
    cfg.dirichlet_alpha = 0.1;
    cfg.seed = 1;

    let fed = cfg.build_federation()?;
    println!("client sizes: {:?}", fed.partition.sizes());
    let mut sim = Simulation::new(cfg.run_config(), fed)?.with_workers(4)?;
    sim.run(|r| {
        let pairs = r.plan.as_ref().map(|p| p.pairs()).unwrap_or_default();
        println!(
            "round {:>2}  acc {:.3}  loss {:.4}  pairs {:?}",
            r.round, r.test_accuracy, r.mean_train_loss, pairs
        );
    })?;

    let features = &sim.state().features;
    let set = (0..features.num_classes())
        .filter(|&c| features.is_set(c))
        .count();
    println!(
        "global features set for {set}/{} classes",
        features.num_classes()
    );
    Ok(())
}

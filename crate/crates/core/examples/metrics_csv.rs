//! Runs two strategies through the experiment harness, writing metrics
//! CSVs, and prints the comparison table.

use fedcme::config::{BlobsSpec, DatasetSpec, ExperimentConfig};
use fedcme::experiment::run_sweep;
use fedcme::metrics::compare;
use fedcme::{Result, Variant};

fn main() -> Result<()> {
    let out = std::env::temp_dir().join("fedcme-metrics-demo");
    let dataset = DatasetSpec::Blobs(BlobsSpec {
        classes: 6,
        dim: 10,
        train_per_class: 100,
        test_per_class: 50,
        spread: 1.0,
    });
    let mut files = Vec::new();
    for variant in [Variant::FedAvg, Variant::FedCme] {
        let mut cfg = ExperimentConfig::new(variant, 10, 4, 20, dataset.clone());
        cfg.dirichlet_alpha = 0.2;
        cfg.output_path = Some(out.join(format!("{variant}.csv")));
        for summary in run_sweep(&cfg, &[0, 1, 2], 2)? {
            println!("{summary}");
            files.push(summary.output);
        }
    }
    print!("{}", compare(&files)?);
    Ok(())
}

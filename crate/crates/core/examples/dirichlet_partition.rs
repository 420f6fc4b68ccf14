//! Label histograms of a Dirichlet split at a few concentration values.

use fedcme::data::{dirichlet_partition, generate_blobs, label_distribution};
use fedcme::Result;

fn main() -> Result<()> {
    let ds = generate_blobs(5, 2, 100, 0.5, 0)?;
    for alpha in [0.1, 1.0, 100.0] {
        let part = dirichlet_partition(&ds, 6, alpha, 42)?;
        println!("alpha = {alpha}");
        for (k, idx) in part.clients().iter().enumerate() {
            let hist: Vec<String> = label_distribution(&ds, idx)
                .iter()
                .map(|p| format!("{p:.2}"))
                .collect();
            println!(
                "  client {k}: {:>4} samples  [{}]",
                idx.len(),
                hist.join(" ")
            );
        }
    }
    Ok(())
}

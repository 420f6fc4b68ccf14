//! Reads an IDX image/label pair, e.g. Fashion-MNIST.
//!
//! ```text
//! cargo run --example idx_dataset -- train-images-idx3-ubyte train-labels-idx1-ubyte
//! ```
//!
//! Without arguments a small synthetic pair is written to the temp
//! directory and read back.

use fedcme::data::{load_idx, write_idx, Dataset};
use fedcme::{Result, Tensor};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (images, labels) = match args.as_slice() {
        [i, l] => (i.into(), l.into()),
        _ => {
            let dir = std::env::temp_dir();
            let (i, l) = (
                dir.join("demo-images-idx3-ubyte"),
                dir.join("demo-labels-idx1-ubyte"),
            );
            // 3 images of 4x4, a diagonal stroke of increasing brightness
            let pixels: Vec<f64> = (0..3)
                .flat_map(|n| {
                    (0..16).map(move |p| {
                        if p % 5 == 0 {
                            (n + 1) as f64 * 85.0 / 255.0
                        } else {
                            0.0
                        }
                    })
                })
                .collect();
            let ds = Dataset::new(Tensor::new(vec![3, 16], pixels)?, vec![0, 1, 2], 3)?;
            write_idx(&ds, 4, 4, &i, &l)?;
            (i, l)
        }
    };
    let ds = load_idx(&images, &labels)?;
    println!(
        "{} samples of dimension {}, {} classes",
        ds.len(),
        ds.dim(),
        ds.num_classes()
    );
    println!(
        "class counts: {:?}",
        ds.class_counts(&(0..ds.len()).collect::<Vec<_>>())
    );
    let first = ds.features().row(0);
    println!(
        "first sample: mean pixel {:.4}",
        first.iter().sum::<f64>() / first.len() as f64
    );
    Ok(())
}

//! Drives the two halves of a FedCME local update by hand for two clients
//! and swaps their classifiers at the barrier.

use fedcme::data::{dirichlet_partition, generate_blobs};
use fedcme::model::swap_classifiers;
use fedcme::nn::ClassFeatures;
use fedcme::strategy::{fedcme_begin, fedcme_finish, ClientConfig, ClientData, RoundContext};
use fedcme::{Result, SplitModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let ds = generate_blobs(4, 6, 50, 0.8, 3)?;
    let part = dirichlet_partition(&ds, 2, 0.2, 3)?;
    let global = SplitModel::init(6, &[16, 8], 4, &mut ChaCha8Rng::seed_from_u64(3))?;
    let cfg = ClientConfig::fedcme(0.01);
    let ctx = RoundContext {
        run_seed: 3,
        round: 0,
    };
    let features = ClassFeatures::unset(4, 8);
    let data: Vec<ClientData> = (0..2)
        .map(|k| ClientData {
            client: k,
            dataset: &ds,
            indices: part.client(k),
        })
        .collect();
    for d in &data {
        println!("client {}: class counts {:?}", d.client, d.class_counts());
    }

    let mut a = fedcme_begin(&global, &data[0], &cfg, ctx, &features)?;
    let mut b = fedcme_begin(&global, &data[1], &cfg, ctx, &features)?;
    println!(
        "barrier after {} of {} epochs",
        a.epochs_completed, cfg.local_epochs
    );

    let extractor_before = a.model.extractor().to_vec();
    swap_classifiers(&mut a.model, &mut b.model)?;
    assert_eq!(a.model.extractor(), extractor_before.as_slice());

    for (state, d) in [(a, &data[0]), (b, &data[1])] {
        let r = fedcme_finish(state, d, &cfg, ctx, &features)?;
        let eval: Vec<String> = r
            .eval_vector
            .unwrap_or_default()
            .iter()
            .map(|v| format!("{v:.2}"))
            .collect();
        println!(
            "client {}: loss {:.4}, evaluation vector [{}]",
            r.client,
            r.train_loss,
            eval.join(" ")
        );
    }
    Ok(())
}

//! Compares backprop of cross-entropy plus feature alignment against
//! central finite differences.

use fedcme::nn::{finite_difference_grad, l2_feature_loss, softmax_cross_entropy, ClassFeatures};
use fedcme::{Result, SplitModel, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = SplitModel::init(4, &[6, 5], 3, &mut rng)?;
    let x = Tensor::new(
        vec![6, 4],
        (0..24).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;
    let y = vec![0, 1, 2, 0, 1, 1];
    let mut global = ClassFeatures::unset(3, 5);
    global.set(0, vec![0.2; 5])?;
    global.set(1, vec![0.5, 0.0, 0.1, 0.3, 0.9])?;
    let mu = 0.5;

    let cache = model.forward_train(&x)?;
    let (_, dlogits) = softmax_cross_entropy(&cache.logits, &y)?;
    let (_, mut dfeat) = l2_feature_loss(&cache.features, &y, &global)?;
    dfeat.data_mut().iter_mut().for_each(|v| *v *= mu);
    let analytic = model.backward(&cache, &dlogits, Some(&dfeat))?;

    let params: Vec<Tensor> = model.parameters().into_iter().cloned().collect();
    let numeric = finite_difference_grad(
        |p| {
            let mut m = model.clone();
            for (dst, src) in m.parameters_mut().into_iter().zip(p) {
                *dst = src.clone();
            }
            let ce = softmax_cross_entropy(&m.forward(&x).unwrap(), &y)
                .unwrap()
                .0;
            let l2 = l2_feature_loss(&m.forward_features(&x).unwrap(), &y, &global)
                .unwrap()
                .0;
            ce + mu * l2
        },
        &params,
        1e-6,
    );

    for (i, (a, n)) in analytic.grads.iter().zip(&numeric.grads).enumerate() {
        let diff = a
            .data()
            .iter()
            .zip(n.data())
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = a
            .squared_norm()
            .sqrt()
            .max(n.squared_norm().sqrt())
            .max(1e-12);
        println!(
            "tensor {i} {:?}: relative error {:.2e}",
            a.shape(),
            diff / scale
        );
    }
    Ok(())
}

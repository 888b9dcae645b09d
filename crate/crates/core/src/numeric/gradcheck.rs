//! Central finite differences for checking analytic gradients.

use rand::Rng;

use super::Mlp;

/// Default step for [`numeric_gradient`].
pub const FD_STEP: f64 = 1e-5;

/// `∂f/∂θ` for every parameter of `net` by central differences, flattened in
/// block order.
pub fn numeric_gradient(net: &Mlp, step: f64, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    let sizes: Vec<usize> = net.param_blocks().iter().map(|b| b.len()).collect();
    let mut out = Vec::with_capacity(sizes.iter().sum());
    for (b, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = probe.param_blocks_mut()[b][i];
            probe.param_blocks_mut()[b][i] = orig + step;
            let up = f(&probe);
            probe.param_blocks_mut()[b][i] = orig - step;
            let down = f(&probe);
            probe.param_blocks_mut()[b][i] = orig;
            out.push((up - down) / (2.0 * step));
        }
    }
    out
}

/// Replaces every bias with a draw from `[-0.1, 0.1]`.
///
/// Freshly initialized networks have zero biases, so a layer whose inputs
/// are all zero sits exactly on the ReLU kink where finite differences are
/// meaningless. Random biases move checks off that set.
pub fn jitter_biases<R: Rng + ?Sized>(net: &mut Mlp, rng: &mut R) {
    for (i, block) in net.param_blocks_mut().into_iter().enumerate() {
        if i % 2 == 1 {
            block
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
    }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Activation, Matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_layer_network_matches_finite_differences() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = Mlp::new(
                5,
                &[
                    (6, Activation::Relu),
                    (4, Activation::Relu),
                    (3, Activation::Softmax),
                ],
                &mut rng,
            )
            .unwrap();
            jitter_biases(&mut net, &mut rng);
            let x = Matrix::from_vec(4, 5, (0..20).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
            let weights =
                Matrix::from_vec(4, 3, (0..12).map(|i| (i % 5) as f64 - 2.0).collect()).unwrap();
            let f = |n: &Mlp| {
                let y = n.forward(&x).unwrap();
                y.data()
                    .iter()
                    .zip(weights.data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            };
            let trace = net.forward_trace(&x).unwrap();
            let (grads, _) = net.backward(&trace, &weights).unwrap();
            let err = relative_error(&grads.flatten(), &numeric_gradient(&net, FD_STEP, f));
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn relative_error_conventions() {
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        assert!((relative_error(&[1.0, 0.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}

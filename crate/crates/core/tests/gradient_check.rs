use nalgebra::DMatrix;
use orchdyn::models::{gradients, loss, ModelParams, Sequence, Variant};
use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest relative disagreement between the analytic gradient and central
/// differences, with a floor of 1e-6 on the denominator.
pub fn max_relative_error(variant: Variant, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, k, h) = (7, 5, 3);
    let data: Vec<Sequence> = (0..2)
        .map(|_| {
            let x = DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0));
            let y = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Sequence::new(x, y).unwrap()
        })
        .collect();
    let mut p = ModelParams::init(variant, k, h, seed);
    // non-zero biases so every block is exercised
    for w in &mut p.weights {
        if *w == 0.0 {
            *w = rng.gen_range(-0.5..0.5);
        }
    }
    let (_, g) = gradients(&p, &data).unwrap();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..p.weights.len() {
        let orig = p.weights[i];
        p.weights[i] = orig + eps;
        let up = loss(&p, &data).unwrap();
        p.weights[i] = orig - eps;
        let down = loss(&p, &data).unwrap();
        p.weights[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let rel = (g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

proptest! {
    #![proptest_config(Config { cases: 100, failure_persistence: Some(Box::new(FileFailurePersistence::Off)), ..Config::default() })]

    #[test]
    fn analytic_gradients_match_finite_differences(seed in any::<u64>()) {
        for variant in Variant::ALL {
            let e = max_relative_error(variant, seed);
            prop_assert!(e < 1e-4, "{variant}: {e}");
        }
    }
}

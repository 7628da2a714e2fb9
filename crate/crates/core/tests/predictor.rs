use flash_core::predictor::{fit_accuracy, predict_accuracy, AccuracyModel, AccuracySample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 25 noise-free samples on a geometric grid spanning `[b/5, 20b]`.
fn samples_for(truth: &AccuracyModel) -> Vec<AccuracySample> {
    (0..25)
        .map(|i| {
            let g = truth.b / 5.0 * 100f64.powf(i as f64 / 24.0);
            AccuracySample::new(g, truth.predict(g).unwrap())
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn recovers_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let truth = AccuracyModel::new(
            rng.random_range(0.9..1.2),
            rng.random_range(1.0..50.0),
            rng.random_range(-5.0..0.0),
        )
        .unwrap();
        let fit = fit_accuracy(&samples_for(&truth)).unwrap();
        assert!(rel(fit.a, truth.a) < 1e-4, "{truth:?} -> {fit:?}");
        assert!(rel(fit.b, truth.b) < 1e-4, "{truth:?} -> {fit:?}");
        assert!(rel(fit.c, truth.c) < 1e-4, "{truth:?} -> {fit:?}");
        assert!(fit.rmse <= 1e-8, "{fit:?}");
    }
}

fn model() -> impl Strategy<Value = AccuracyModel> {
    (0.5f64..2.0, 0.01f64..100.0, -6.0f64..3.0)
        .prop_map(|(a, b, c)| AccuracyModel::new(a, b, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn increasing_and_bounded(m in model(), g0 in 0.1f64..10.0, span in 1.0f64..1000.0) {
        let grid: Vec<f64> = (0..100).map(|i| g0 + span * i as f64 / 99.0).collect();
        let theta: Vec<f64> = grid.iter().map(|&g| predict_accuracy(&m, g).unwrap()).collect();
        for w in theta.windows(2) {
            prop_assert!(w[1] > w[0], "{:?}", w);
        }
        for t in &theta {
            prop_assert!(*t > 0.0 && *t < 1.0 / m.a);
        }
    }

    #[test]
    fn refit_is_idempotent(a in 0.9f64..1.2, b in 1.0f64..50.0, c in -5.0f64..0.0) {
        let truth = AccuracyModel::new(a, b, c).unwrap();
        let first = fit_accuracy(&samples_for(&truth)).unwrap();
        let again = fit_accuracy(&samples_for(&first)).unwrap();
        prop_assert!((again.a - first.a).abs() <= 1e-6 * first.a.abs().max(1.0));
        prop_assert!((again.b - first.b).abs() <= 1e-6 * first.b.abs().max(1.0));
        prop_assert!((again.c - first.c).abs() <= 1e-6 * first.c.abs().max(1.0));
    }
}

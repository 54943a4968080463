//! Backpropagated gradients against a central finite-difference oracle.

mod common;

use penny_core::learner::{gradient, loss, ModelWeights, Sample, ARCHITECTURE};

const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
const FLOOR: f64 = 1e-6;

fn finite_difference(w: &ModelWeights, batch: &[Sample]) -> Vec<f64> {
    let mut probe = w.clone();
    (0..w.params().len())
        .map(|i| {
            let original = probe.params()[i];
            probe.params_mut()[i] = original + STEP;
            let up = loss(&probe, batch).unwrap();
            probe.params_mut()[i] = original - STEP;
            let down = loss(&probe, batch).unwrap();
            probe.params_mut()[i] = original;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(FLOOR))
        .fold(0.0, f64::max)
}

#[test]
fn matches_central_differences_on_random_draws() {
    for draw in 0..6u64 {
        let mut rng = common::rng(100 + draw);
        let w = ModelWeights::init(&ARCHITECTURE, draw).unwrap();
        let batch: Vec<Sample> = (0..24)
            .map(|_| Sample {
                q: common::random_config(&mut rng),
                target: common::random_unit(&mut rng),
            })
            .collect();
        let (l, g) = gradient(&w, &batch).unwrap();
        assert_eq!(l, loss(&w, &batch).unwrap());
        let err = max_relative_error(g.params(), &finite_difference(&w, &batch));
        assert!(err < 1e-4, "draw {draw}: max relative error {err:e}");
    }
}

#[test]
fn matches_central_differences_on_a_deeper_narrow_net() {
    let mut rng = common::rng(7);
    let w = ModelWeights::init(&[4, 3, 5, 2, 3], 3).unwrap();
    let batch: Vec<Sample> = (0..9)
        .map(|_| Sample {
            q: common::random_config(&mut rng),
            target: common::random_unit(&mut rng),
        })
        .collect();
    let (_, g) = gradient(&w, &batch).unwrap();
    let err = max_relative_error(g.params(), &finite_difference(&w, &batch));
    assert!(err < 1e-4, "max relative error {err:e}");
}

#[test]
fn batch_gradient_is_mean_of_sample_gradients() {
    let mut rng = common::rng(8);
    let w = ModelWeights::init(&ARCHITECTURE, 8).unwrap();
    // More samples than one parallel chunk.
    let batch: Vec<Sample> = (0..1500)
        .map(|_| Sample {
            q: common::random_config(&mut rng),
            target: common::random_unit(&mut rng),
        })
        .collect();
    let (_, whole) = gradient(&w, &batch).unwrap();
    let mut mean = vec![0.0; w.params().len()];
    for s in &batch {
        let (_, g) = gradient(&w, std::slice::from_ref(s)).unwrap();
        mean.iter_mut().zip(g.params()).for_each(|(m, x)| *m += x / batch.len() as f64);
    }
    for (a, b) in whole.params().iter().zip(&mean) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

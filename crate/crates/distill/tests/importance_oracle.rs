mod common;

use common::assert_close;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdm_distill::{diffuse_from_trajectory, importance_weight, sample_tau, DistillError};

/// Hand-computed density ratio in one dimension: state 0.5 at sigma 0.5,
/// clean prediction 0, diffused point 0.5 at sigma 1.  The target density is
/// N(0.5; 0, 1) and the proposal N(0.5; 0.5, 0.75), giving
///
///   w = phi(0.5) / pdf_{N(0, 0.75)}(0) = exp(-1/8) * sqrt(3)/2 ~ 0.7643.
#[test]
fn weight_matches_hand_computed_ratio() {
    let w = importance_weight(&[0.5], &[0.5], &[0.0], 0.5, 1.0, 10.0).unwrap();
    let exact = (-0.125f64).exp() * 0.75f64.sqrt();
    assert_close(w, exact, 1e-12, "closed-form ratio");
    assert_close(w, 0.7643, 2e-4, "quoted value");

    // The same number as a ratio of explicitly evaluated densities.
    let pdf = |x: f64, mu: f64, var: f64| {
        (-(x - mu) * (x - mu) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    assert_close(w, pdf(0.5, 0.0, 1.0) / pdf(0.5, 0.5, 0.75), 1e-12, "density ratio");
}

#[test]
fn weight_clips_from_above() {
    // Same configuration but the diffused point sits far in the target's
    // favour: x_tau = 12 with clean mean 12 makes the ratio enormous.
    let unclipped = importance_weight(&[12.0], &[0.5], &[12.0], 0.5, 1.0, 1e300).unwrap();
    assert!(unclipped > 10.0, "ratio should exceed the clip, got {unclipped}");
    let clipped = importance_weight(&[12.0], &[0.5], &[12.0], 0.5, 1.0, 10.0).unwrap();
    assert_eq!(clipped, 10.0);
}

#[test]
fn weight_is_exactly_one_when_state_equals_clean_at_zero_noise() {
    // sigma_state = 0 makes proposal and target the same density, so the log
    // ratio is exactly 0 and the weight exactly 1 for any draw.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let state = vec![0.3, -1.2, 0.9, 2.4];
    let batch =
        diffuse_from_trajectory(&state, &state, 2, 0.0, 0.8, true, 10.0, &mut rng).unwrap();
    assert_eq!(batch.weights, vec![1.0, 1.0]);
    assert_eq!(batch.weight_mean(), 1.0);
    assert_eq!(batch.weight_max(), 1.0);
}

#[test]
fn weights_are_one_when_importance_is_disabled() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let state = vec![0.3, -1.2, 0.9, 2.4];
    let clean = vec![0.0, 0.0, 0.1, 0.2];
    let batch =
        diffuse_from_trajectory(&state, &clean, 2, 0.5, 2.0, false, 10.0, &mut rng).unwrap();
    assert_eq!(batch.weights, vec![1.0, 1.0]);
}

/// Unbiasedness: the weighted proposal estimator of E_{q(x_tau | clean)}[g]
/// agrees with direct sampling from the target for g(x) = x^2, whose exact
/// value is clean^2 + sigma_tau^2 = 1.
#[test]
fn weighted_estimator_is_unbiased() {
    let n = 1_000_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let state = vec![0.5; n];
    let clean = vec![0.0; n];
    // Large clip: the ratio stays around e^{x^2/6} for proposal draws, far
    // below this bound, so no clipping bias enters.
    let batch =
        diffuse_from_trajectory(&state, &clean, 1, 0.5, 1.0, true, 1e12, &mut rng).unwrap();

    let vals: Vec<f64> = batch
        .x_tau
        .iter()
        .zip(&batch.weights)
        .map(|(x, w)| w * x * x)
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let three_sigma = 3.0 * (var / n as f64).sqrt();
    assert!(
        (mean - 1.0).abs() <= three_sigma.max(1e-3),
        "weighted second moment {mean} not within {three_sigma} of 1"
    );

    // The weights themselves integrate to one in expectation.
    let wmean = batch.weight_mean();
    let wvar = batch
        .weights
        .iter()
        .map(|w| (w - wmean) * (w - wmean))
        .sum::<f64>()
        / n as f64;
    let band = 3.0 * (wvar / n as f64).sqrt();
    assert!(
        (wmean - 1.0).abs() <= band.max(1e-3),
        "mean weight {wmean} not within {band} of 1"
    );
}

#[test]
fn noise_must_strictly_increase() {
    let state = vec![0.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (s_state, s_tau) in [(0.5, 0.5), (0.5, 0.3), (1.0, 0.0), (-0.1, 1.0), (f64::NAN, 1.0)] {
        let err = diffuse_from_trajectory(&state, &state, 2, s_state, s_tau, true, 10.0, &mut rng)
            .unwrap_err();
        assert!(
            matches!(err, DistillError::NonIncreasingNoise { .. }),
            "({s_state}, {s_tau}) gave {err:?}"
        );
        let err = importance_weight(&state, &state, &state, s_state, s_tau, 10.0).unwrap_err();
        assert!(matches!(err, DistillError::NonIncreasingNoise { .. }));
    }
}

#[test]
fn shape_mismatches_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let state = vec![0.0, 0.0, 0.0];
    let clean = vec![0.0, 0.0];
    assert!(matches!(
        diffuse_from_trajectory(&state, &clean, 2, 0.1, 1.0, true, 10.0, &mut rng),
        Err(DistillError::DataShape { .. })
    ));
    assert!(matches!(
        diffuse_from_trajectory(&[], &[], 2, 0.1, 1.0, true, 10.0, &mut rng),
        Err(DistillError::DataShape { .. })
    ));
    assert!(matches!(
        importance_weight(&[0.0], &[0.0, 1.0], &[0.0], 0.1, 1.0, 10.0),
        Err(DistillError::DataShape { .. })
    ));
}

#[test]
fn tau_draws_stay_inside_the_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    // Interior interval of a K=4, T=1 partition.
    for _ in 0..10_000 {
        let tau = sample_tau(0.5, 0.75, &mut rng).unwrap();
        assert!(tau > 0.5 && tau <= 0.75, "tau {tau} outside (0.5, 0.75]");
    }
    // First interval: zero is excluded even though it is a boundary.
    for _ in 0..10_000 {
        let tau = sample_tau(0.0, 0.25, &mut rng).unwrap();
        assert!(tau > 0.0 && tau <= 0.25, "tau {tau} outside (0, 0.25]");
    }
}

#[test]
fn tau_mean_approaches_the_midpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mean: f64 =
        (0..n).map(|_| sample_tau(0.5, 0.75, &mut rng).unwrap()).sum::<f64>() / n as f64;
    assert_close(mean, 0.625, 0.01, "tau mean over [0.5, 0.75]");
}

#[test]
fn tau_rejects_bad_intervals() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (lo, hi) in [(0.5, 0.5), (0.5, 0.2), (-0.1, 0.5), (0.0, f64::NAN)] {
        assert!(
            sample_tau(lo, hi, &mut rng).is_err(),
            "interval ({lo}, {hi}) should be rejected"
        );
    }
}

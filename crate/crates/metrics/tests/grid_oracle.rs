mod common;

use common::ring8;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdm_metrics::{
    exact_diffused_samples, grid_kl_floor, grid_kl_vs_analytic, GridSpec, MetricsError,
    DEFAULT_GRID_RESOLUTION,
};

#[test]
fn fitted_grid_covers_the_diffused_mass() {
    let gmm = ring8();
    let grid = GridSpec::for_diffused(&gmm, 0.5, DEFAULT_GRID_RESOLUTION).unwrap();
    assert_eq!(grid.dim(), 2);
    assert_eq!(grid.n_cells(), 64 * 64);
    let coverage = grid.check_coverage(&gmm, 0.5).unwrap();
    assert!(coverage >= 0.999, "coverage bound {coverage}");

    // A grid fitted at one noise level fails the coverage check at a much
    // larger one.
    let err = grid.check_coverage(&gmm, 8.0).unwrap_err();
    assert!(matches!(err, MetricsError::InvalidGrid { .. }));
}

#[test]
fn rejects_bad_grid_specs() {
    assert!(GridSpec::new(vec![0.0], vec![1.0], 15).is_err());
    assert!(GridSpec::new(vec![0.0, 0.0], vec![1.0], 64).is_err());
    assert!(GridSpec::new(vec![1.0], vec![1.0], 64).is_err());
    assert!(GridSpec::new(vec![0.0], vec![f64::INFINITY], 64).is_err());
    assert!(GridSpec::new(vec![], vec![], 64).is_err());
    assert!(GridSpec::new(vec![0.0; 4], vec![1.0; 4], 64).is_err());
    assert!(GridSpec::new(vec![0.0], vec![1.0], 16).is_ok());
}

/// Exact draws from the reference itself land at the smoothing floor: the
/// divergence equals an independently computed floor up to sampling noise.
#[test]
fn matched_samples_sit_at_the_floor() {
    let gmm = ring8();
    let sigma = 0.5;
    let grid = GridSpec::for_diffused(&gmm, sigma, 64).unwrap();
    let n = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = exact_diffused_samples(&gmm, sigma, n, &mut rng).unwrap();
    let report = grid_kl_vs_analytic(&x, &gmm, sigma, &grid).unwrap();
    let floor = grid_kl_floor(&gmm, sigma, &grid, n, &mut ChaCha8Rng::seed_from_u64(22)).unwrap();

    assert!(report.kl >= 0.0);
    assert!(floor.kl > 0.0, "smoothing floor must be positive");
    // Both numbers are dominated by the same deterministic smoothing bias,
    // so two independent matched draws agree tightly.
    let ratio = report.kl / floor.kl;
    assert!(
        (0.8..1.25).contains(&ratio),
        "matched draws should match the floor: kl {} vs floor {}",
        report.kl,
        floor.kl
    );
    assert!(report.oob_fraction < 0.01, "almost everything in bounds");
}

#[test]
fn shifted_samples_blow_past_the_floor() {
    let gmm = ring8();
    let sigma = 0.5;
    let grid = GridSpec::for_diffused(&gmm, sigma, 64).unwrap();
    let n = 4000;
    let shift = 2.0 * gmm.data_std();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut x = exact_diffused_samples(&gmm, sigma, n, &mut rng).unwrap();
    for v in x.iter_mut().step_by(2) {
        *v += shift;
    }
    let report = grid_kl_vs_analytic(&x, &gmm, sigma, &grid).unwrap();
    let floor = grid_kl_floor(&gmm, sigma, &grid, n, &mut ChaCha8Rng::seed_from_u64(24)).unwrap();
    // The floor is dominated by the near-deterministic smoothing bias, so
    // "well above" means well above its tiny sampling variation: a whole
    // nat over the floor is dozens of floor standard deviations.
    assert!(
        report.kl > floor.kl + 1.0 && report.kl > 1.5 * floor.kl,
        "shifted draws should be far above the floor: {} vs {}",
        report.kl,
        floor.kl
    );
}

/// Growing mean shift yields strictly growing divergence.
#[test]
fn divergence_is_monotone_in_the_shift() {
    let gmm = ring8();
    let sigma = 0.5;
    let grid = GridSpec::for_diffused(&gmm, sigma, 64).unwrap();
    let base =
        exact_diffused_samples(&gmm, sigma, 4000, &mut ChaCha8Rng::seed_from_u64(25)).unwrap();
    let std = gmm.data_std();
    let mut last = -1.0;
    for mult in [0.0, 1.0, 2.0, 3.0] {
        let mut x = base.clone();
        for v in x.iter_mut().step_by(2) {
            *v += mult * std;
        }
        let kl = grid_kl_vs_analytic(&x, &gmm, sigma, &grid).unwrap().kl;
        assert!(kl > last, "kl should grow with shift {mult}: {kl} after {last}");
        last = kl;
    }
}

#[test]
fn out_of_bounds_fraction_is_reported_not_fatal() {
    let gmm = ring8();
    let sigma = 0.5;
    let grid = GridSpec::for_diffused(&gmm, sigma, 64).unwrap();
    let mut x =
        exact_diffused_samples(&gmm, sigma, 2000, &mut ChaCha8Rng::seed_from_u64(26)).unwrap();
    for v in x.iter_mut() {
        *v += 100.0;
    }
    let report = grid_kl_vs_analytic(&x, &gmm, sigma, &grid).unwrap();
    assert!(report.oob_fraction > 0.99, "oob fraction {}", report.oob_fraction);
    assert!(report.kl.is_finite());
}

#[test]
fn rejects_bad_sample_buffers() {
    let gmm = ring8();
    let grid = GridSpec::for_diffused(&gmm, 0.5, 64).unwrap();
    assert!(matches!(
        grid_kl_vs_analytic(&[], &gmm, 0.5, &grid),
        Err(MetricsError::EmptySamples)
    ));
    assert!(matches!(
        grid_kl_vs_analytic(&[0.0; 5], &gmm, 0.5, &grid),
        Err(MetricsError::RaggedSamples { .. })
    ));
    assert!(matches!(
        grid_kl_vs_analytic(&[0.0, f64::NAN], &gmm, 0.5, &grid),
        Err(MetricsError::NonFinite { .. })
    ));
    let gmm_1d = tdm_diffusion::GaussianMixture::isotropic(&[vec![0.0]], 1.0).unwrap();
    assert!(matches!(
        grid_kl_vs_analytic(&[0.0, 0.0], &gmm_1d, 0.5, &grid),
        Err(MetricsError::DimMismatch { .. })
    ));
}

#[test]
fn exact_draw_helper_is_deterministic_and_validating() {
    let gmm = ring8();
    let a = exact_diffused_samples(&gmm, 0.7, 50, &mut ChaCha8Rng::seed_from_u64(31)).unwrap();
    let b = exact_diffused_samples(&gmm, 0.7, 50, &mut ChaCha8Rng::seed_from_u64(31)).unwrap();
    assert_eq!(a, b);
    assert!(exact_diffused_samples(&gmm, 0.7, 0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    assert!(exact_diffused_samples(&gmm, -1.0, 5, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
}

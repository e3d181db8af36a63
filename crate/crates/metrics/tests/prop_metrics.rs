//! Property tests: metric symmetry, non-negativity, and accounting
//! identities on random inputs.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdm_diffusion::GaussianMixture;
use tdm_metrics::{grid_kl_vs_analytic, mode_coverage, sliced_wasserstein, GridSpec};

fn sample_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

proptest! {
    /// Symmetric in its two sample sets under a shared direction seed.
    #[test]
    fn transport_distance_is_symmetric(
        a in sample_vec(24),
        b in sample_vec(16),
        seed in 0u64..1u64 << 32,
    ) {
        let ab = sliced_wasserstein(&a, &b, 2, 8, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let ba = sliced_wasserstein(&b, &a, 2, 8, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(ab, ba);
    }

    /// Non-negative, finite, and exactly zero against itself.
    #[test]
    fn transport_distance_is_nonnegative(
        a in sample_vec(20),
        b in sample_vec(30),
        seed in 0u64..1u64 << 32,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = sliced_wasserstein(&a, &b, 2, 4, &mut rng).unwrap();
        prop_assert!(d.is_finite() && d >= 0.0);
        let self_d = sliced_wasserstein(&a, &a, 2, 4, &mut rng).unwrap();
        prop_assert_eq!(self_d, 0.0);
    }

    /// The grid divergence is a KL between two normalized distributions:
    /// finite and non-negative for any in-range sample buffer.
    #[test]
    fn grid_divergence_is_nonnegative(samples in sample_vec(40)) {
        let gmm = GaussianMixture::isotropic(&[vec![0.0, 0.0]], 1.0).unwrap();
        let grid = GridSpec::new(vec![-4.0, -4.0], vec![4.0, 4.0], 16).unwrap();
        let report = grid_kl_vs_analytic(&samples, &gmm, 0.5, &grid).unwrap();
        prop_assert!(report.kl.is_finite() && report.kl >= 0.0);
        prop_assert!((0.0..=1.0).contains(&report.oob_fraction));
    }

    /// Mode accounting: assigned samples never exceed the total, per-mode
    /// counts sum to the assigned number, covered modes actually hold the
    /// required share.
    #[test]
    fn mode_accounting_is_consistent(samples in sample_vec(30), radius in 0.5f64..5.0) {
        let gmm = GaussianMixture::isotropic(&[vec![-1.0, 0.0], vec![1.0, 0.0]], 0.25).unwrap();
        let cov = mode_coverage(&samples, &gmm, radius).unwrap();
        let n = samples.len() / 2;
        prop_assert_eq!(cov.n, n);
        prop_assert!(cov.assigned <= n);
        prop_assert_eq!(cov.counts.iter().sum::<usize>(), cov.assigned);
        for &m in &cov.covered {
            prop_assert!(cov.counts[m] * 100 >= n, "covered mode below the 1% share");
        }
    }
}

mod common;

use common::assert_close;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tdm_metrics::{sliced_wasserstein, MetricsError};

fn gauss_1d(n: usize, mean: f64, std: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mean + std * z
        })
        .collect()
}

#[test]
fn identical_sets_give_exactly_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = gauss_1d(240, 0.3, 1.7, &mut rng);
    let d = sliced_wasserstein(&a, &a, 2, 16, &mut rng).unwrap();
    assert_eq!(d, 0.0);
}

/// Equal-variance Gaussians a shift apart have W2 equal to the shift.
#[test]
fn shifted_gaussians_match_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = gauss_1d(20_000, 0.0, 1.0, &mut rng);
    let b = gauss_1d(20_000, 3.0, 1.0, &mut rng);
    let d = sliced_wasserstein(&a, &b, 1, 8, &mut rng).unwrap();
    assert_close(d, 3.0, 0.05, "1-D Gaussian shift");
}

/// Four atoms, worked by hand: every quantile segment differs by exactly 1.
#[test]
fn hand_computed_atom_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = sliced_wasserstein(&[0.0, 2.0], &[1.0, 3.0], 1, 4, &mut rng).unwrap();
    assert_close(d, 1.0, 1e-12, "equal-size atoms");

    // Unequal sizes: quantiles of {0,2} vs the single atom {1} still differ
    // by 1 on every segment.
    let d = sliced_wasserstein(&[0.0, 2.0], &[1.0], 1, 4, &mut rng).unwrap();
    assert_close(d, 1.0, 1e-12, "unequal-size atoms");
}

#[test]
fn symmetric_under_argument_swap() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = gauss_1d(300, 0.0, 1.0, &mut rng);
    let b = gauss_1d(200, 1.0, 2.0, &mut rng);
    let ab = sliced_wasserstein(&a, &b, 2, 32, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let ba = sliced_wasserstein(&b, &a, 2, 32, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(ab, ba);
}

/// Rotating both sets by the same rigid rotation leaves the distance
/// unchanged up to Monte Carlo noise in the random directions.
#[test]
fn invariant_under_simultaneous_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 4000;
    let mut a = vec![0.0; 2 * n];
    let mut b = vec![0.0; 2 * n];
    for i in 0..n {
        let (z1, z2): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        a[2 * i] = z1;
        a[2 * i + 1] = 0.4 * z2;
        let (w1, w2): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        b[2 * i] = 1.5 + 0.7 * w1;
        b[2 * i + 1] = -0.5 + w2;
    }
    let rotate = |x: &[f64], angle: f64| -> Vec<f64> {
        let (c, s) = (angle.cos(), angle.sin());
        x.chunks_exact(2)
            .flat_map(|r| [c * r[0] - s * r[1], s * r[0] + c * r[1]])
            .collect()
    };
    let base = sliced_wasserstein(&a, &b, 2, 256, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let ar = rotate(&a, 0.6108652381980153);
    let br = rotate(&b, 0.6108652381980153);
    let rot = sliced_wasserstein(&ar, &br, 2, 256, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    assert_close(rot, base, 0.10, "rotation invariance");
}

#[test]
fn grows_with_separation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = gauss_1d(4000, 0.0, 1.0, &mut rng);
    let mut last = -1.0;
    for shift in [0.0, 1.0, 2.0, 3.0] {
        let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let d = sliced_wasserstein(&a, &b, 1, 4, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert!(d > last, "distance should grow with shift: {d} after {last}");
        last = d;
    }
}

#[test]
fn rejects_bad_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ok = vec![0.0; 8];
    assert!(matches!(
        sliced_wasserstein(&[], &ok, 2, 4, &mut rng),
        Err(MetricsError::EmptySamples)
    ));
    assert!(matches!(
        sliced_wasserstein(&ok, &[0.0; 7], 2, 4, &mut rng),
        Err(MetricsError::RaggedSamples { .. })
    ));
    assert!(matches!(
        sliced_wasserstein(&ok, &ok, 0, 4, &mut rng),
        Err(MetricsError::InvalidArgument { .. })
    ));
    assert!(matches!(
        sliced_wasserstein(&ok, &ok, 2, 0, &mut rng),
        Err(MetricsError::InvalidArgument { .. })
    ));
    let bad = vec![0.0, f64::NAN, 0.0, 0.0];
    assert!(matches!(
        sliced_wasserstein(&bad, &ok, 2, 4, &mut rng),
        Err(MetricsError::NonFinite { .. })
    ));
}

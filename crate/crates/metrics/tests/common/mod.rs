#![allow(dead_code)]

use tdm_diffusion::GaussianMixture;

/// Eight equal-weight isotropic modes on a circle of radius 2.
pub fn ring8() -> GaussianMixture {
    let means: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 8.0;
            vec![2.0 * a.cos(), 2.0 * a.sin()]
        })
        .collect();
    GaussianMixture::isotropic(&means, 0.01).unwrap()
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    let scale = want.abs().max(1.0);
    assert!(
        (got - want).abs() <= tol * scale,
        "{what}: got {got}, want {want} (tol {tol})"
    );
}

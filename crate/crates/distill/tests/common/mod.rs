#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdm_diffusion::{DenoiserNet, NetConfig, NoiseSchedule, Role};

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    let denom = want.abs().max(1.0);
    assert!(
        (got - want).abs() / denom <= tol,
        "{what}: got {got}, want {want} (tol {tol})"
    );
}

/// A freshly initialised net is the exact posterior-mean denoiser for
/// isotropic Gaussian data N(0, data_std² I), so for that data it doubles as
/// an exact teacher.
pub fn gauss_teacher(dim: usize, width: usize, data_std: f64, seed: u64) -> DenoiserNet {
    let cfg = NetConfig {
        data_dim: dim,
        hidden_width: width,
        hidden_layers: 2,
        data_std,
        k_cond: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenoiserNet::init(cfg, Role::Teacher, &mut rng).expect("net init")
}

pub fn sched() -> NoiseSchedule {
    NoiseSchedule::new(10.0).expect("schedule")
}

/// Sample variance of a flat batch, pooled over all coordinates.
pub fn pooled_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean: f64 = xs.iter().sum::<f64>() / n;
    xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

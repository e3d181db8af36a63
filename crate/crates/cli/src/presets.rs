//! Named synthetic datasets, all Gaussian mixtures with analytic diffused
//! scores.

use tdm_diffusion::GaussianMixture;

use crate::error::{CliError, Result};

pub const PRESET_NAMES: [&str; 4] = ["ring8", "grid25", "two-moons-gmm", "single-gauss"];

/// Looks up a dataset preset by name.
///
/// - `ring8`: eight tight modes on a circle of radius 2.
/// - `grid25`: a 5x5 lattice of tight modes with unit spacing.
/// - `two-moons-gmm`: two interleaved half-circle arcs, six components each.
/// - `single-gauss`: one standard isotropic Gaussian.
pub fn preset(name: &str) -> Result<GaussianMixture> {
    let gmm = match name {
        "ring8" => {
            let means: Vec<Vec<f64>> = (0..8)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / 8.0;
                    vec![2.0 * a.cos(), 2.0 * a.sin()]
                })
                .collect();
            GaussianMixture::isotropic(&means, 0.01)
        }
        "grid25" => {
            let mut means = Vec::with_capacity(25);
            for i in -2i32..=2 {
                for j in -2i32..=2 {
                    means.push(vec![i as f64, j as f64]);
                }
            }
            GaussianMixture::isotropic(&means, 0.01)
        }
        "two-moons-gmm" => {
            let per_arc = 6;
            let mut means = Vec::with_capacity(2 * per_arc);
            for i in 0..per_arc {
                let t = std::f64::consts::PI * (i as f64 + 0.5) / per_arc as f64;
                means.push(vec![t.cos(), t.sin()]);
            }
            for i in 0..per_arc {
                let t = std::f64::consts::PI * (i as f64 + 0.5) / per_arc as f64;
                means.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
            }
            GaussianMixture::isotropic(&means, 0.01)
        }
        "single-gauss" => GaussianMixture::isotropic(&[vec![0.0, 0.0]], 1.0),
        _ => {
            return Err(CliError::UnknownPreset {
                name: name.to_string(),
                available: PRESET_NAMES.join(", "),
            })
        }
    }?;
    Ok(gmm)
}

//! Per-boundary comparison of recorded sampler states against the exact
//! diffused marginals.

use rand::Rng;
use tdm_diffusion::{partition_times, GaussianMixture, NoiseSchedule, Trajectory};

use crate::error::{MetricsError, Result};
use crate::grid::exact_diffused_samples;
use crate::sw::sliced_wasserstein;

/// Minimum number of recorded trajectories for the marginal comparison to
/// be meaningful.
pub const MIN_TRAJECTORIES: usize = 1000;

/// Distance of one boundary's state batch from the exact diffused marginal,
/// with the matched-size sampling floor measured alongside it.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryDistance {
    pub t: f64,
    /// Sliced W2 between recorded states and exact diffused draws.
    pub distance: f64,
    /// Sliced W2 between two independent exact draws of the same size.
    pub floor: f64,
}

/// For every partition boundary t_i (including the terminal noise draw at
/// t_K), the sliced W2 between the batch of recorded states x_{t_i} and
/// exact draws from the diffused mixture at sigma(t_i), next to a
/// matched-size calibration floor.
///
/// The partition is rebuilt from the schedule and the record's step count;
/// a record whose stored times disagree is rejected.
pub fn trajectory_marginal_distance<R: Rng + ?Sized>(
    traj: &Trajectory,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    n_projections: usize,
    rng: &mut R,
) -> Result<Vec<BoundaryDistance>> {
    let k = traj.k as usize;
    let times = partition_times(sched, traj.k)?;
    if traj.timesteps.len() != k {
        return Err(MetricsError::PartitionMismatch {
            reason: format!("record has {} stored times for K = {k}", traj.timesteps.len()),
        });
    }
    for i in 0..k {
        let stored = traj.timesteps[k - 1 - i];
        if (stored - times[i]).abs() > 1e-12 * times[i].abs().max(1.0) {
            return Err(MetricsError::PartitionMismatch {
                reason: format!("boundary {i} recorded at t = {stored}, expected {}", times[i]),
            });
        }
    }
    let dim = gmm.dim();
    let state0 = traj.state_at(0).expect("boundary 0 exists");
    if state0.shape().len() != 2 || state0.shape()[1] != dim {
        return Err(MetricsError::DimMismatch {
            expected: dim,
            got: *state0.shape().last().unwrap_or(&0),
        });
    }
    let batch = state0.shape()[0];
    if batch < MIN_TRAJECTORIES {
        return Err(MetricsError::TooFewSamples { needed: MIN_TRAJECTORIES, got: batch });
    }

    let mut out = Vec::with_capacity(k + 1);
    for (i, &t) in times.iter().enumerate() {
        let sigma = sched.sigma(t)?;
        let states = traj
            .state_at(i)
            .ok_or_else(|| MetricsError::PartitionMismatch {
                reason: format!("missing state at boundary {i}"),
            })?;
        let exact = exact_diffused_samples(gmm, sigma, batch, rng)?;
        let exact_b = exact_diffused_samples(gmm, sigma, batch, rng)?;
        let exact_c = exact_diffused_samples(gmm, sigma, batch, rng)?;
        let distance = sliced_wasserstein(states.data(), &exact, dim, n_projections, rng)?;
        let floor = sliced_wasserstein(&exact_b, &exact_c, dim, n_projections, rng)?;
        out.push(BoundaryDistance { t, distance, floor });
    }
    Ok(out)
}

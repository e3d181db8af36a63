mod common;

use common::ring8;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdm_diffusion::{
    record_trajectory, MixtureDenoiser, NetConfig, NetDenoiser, NoiseSchedule, Role, Solver,
};
use tdm_metrics::{trajectory_marginal_distance, MetricsError};

fn sched() -> NoiseSchedule {
    NoiseSchedule::new(10.0).unwrap()
}

/// An exactly-scored teacher integrated with fine steps preserves every
/// boundary marginal: all distances sit at the matched-sampling floor.
#[test]
fn exact_teacher_sits_at_every_floor() {
    let gmm = ring8();
    let sched = sched();
    let teacher = MixtureDenoiser { gmm: &gmm };
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let traj = record_trajectory(&teacher, &sched, 256, 1200, Solver::Heun, &mut rng).unwrap();
    let dists =
        trajectory_marginal_distance(&traj, &gmm, &sched, 32, &mut ChaCha8Rng::seed_from_u64(42))
            .unwrap();
    assert_eq!(dists.len(), 257);

    let mut ratios: Vec<f64> = dists.iter().map(|b| b.distance / b.floor).collect();
    ratios.sort_by(|a, b| a.total_cmp(b));
    let median = ratios[ratios.len() / 2];
    assert!(median < 1.3, "median distance/floor ratio {median} should be near 1");
    for b in &dists {
        assert!(
            b.distance <= 2.5 * b.floor + 0.05 * (1.0 + b.t),
            "boundary t = {} strayed from the floor: distance {} vs floor {}",
            b.t,
            b.distance,
            b.floor
        );
    }
}

/// An untrained student collapses everything toward the origin: far above
/// the floor at t = 0, still at the floor at the shared noise draw t_K.
#[test]
fn untrained_student_fails_only_where_it_acts() {
    let gmm = ring8();
    let sched = sched();
    let cfg = NetConfig {
        data_dim: 2,
        hidden_width: 16,
        hidden_layers: 2,
        data_std: gmm.data_std(),
        k_cond: false,
    };
    let net = tdm_diffusion::DenoiserNet::zeroed(cfg, Role::Student).unwrap();
    let nd = NetDenoiser { net: &net, k: None };
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let traj = record_trajectory(&nd, &sched, 4, 1500, Solver::Euler, &mut rng).unwrap();
    let dists =
        trajectory_marginal_distance(&traj, &gmm, &sched, 48, &mut ChaCha8Rng::seed_from_u64(44))
            .unwrap();
    assert_eq!(dists.len(), 5);

    let at_zero = &dists[0];
    assert!(
        at_zero.distance > 5.0 * at_zero.floor,
        "untrained output should be far off: {} vs floor {}",
        at_zero.distance,
        at_zero.floor
    );
    let at_top = dists.last().unwrap();
    assert!(
        at_top.distance <= 2.0 * at_top.floor,
        "the initial noise draw matches the prior by construction: {} vs floor {}",
        at_top.distance,
        at_top.floor
    );
}

#[test]
fn partition_mismatch_is_rejected() {
    let gmm = ring8();
    let sched_train = sched();
    let teacher = MixtureDenoiser { gmm: &gmm };
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let traj = record_trajectory(&teacher, &sched_train, 4, 1000, Solver::Euler, &mut rng).unwrap();
    let sched_eval = NoiseSchedule::new(8.0).unwrap();
    let err = trajectory_marginal_distance(&traj, &gmm, &sched_eval, 8, &mut rng).unwrap_err();
    assert!(matches!(err, MetricsError::PartitionMismatch { .. }));
}

#[test]
fn too_few_trajectories_are_rejected() {
    let gmm = ring8();
    let sched = sched();
    let teacher = MixtureDenoiser { gmm: &gmm };
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let traj = record_trajectory(&teacher, &sched, 2, 500, Solver::Euler, &mut rng).unwrap();
    let err = trajectory_marginal_distance(&traj, &gmm, &sched, 8, &mut rng).unwrap_err();
    assert!(matches!(err, MetricsError::TooFewSamples { needed: 1000, got: 500 }));
}

#[test]
fn dimension_mismatch_is_rejected() {
    let gmm = ring8();
    let sched = sched();
    let teacher = MixtureDenoiser { gmm: &gmm };
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let traj = record_trajectory(&teacher, &sched, 2, 1000, Solver::Euler, &mut rng).unwrap();
    let gmm_1d = tdm_diffusion::GaussianMixture::isotropic(&[vec![0.0]], 1.0).unwrap();
    let err = trajectory_marginal_distance(&traj, &gmm_1d, &sched, 8, &mut rng).unwrap_err();
    assert!(matches!(err, MetricsError::DimMismatch { .. }));
}

mod common;

use common::{assert_close, gauss_teacher};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdm_autodiff::{Tape, Tensor};
use tdm_distill::{
    default_huber_c, fake_score_loss, huber_loss, l2_loss, revised_target, LambdaRule,
};
use tdm_diffusion::{score_from_denoiser, SigmaQuery};

fn tracked(tape: &Tape, rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::leaf(tape, vec![rows, cols], data).unwrap()
}

#[test]
fn l2_value_matches_hand_computation() {
    let tape = Tape::new();
    let x = tracked(&tape, 2, 2, vec![1.0, 2.0, -1.0, 0.5]);
    let t = Tensor::matrix(2, 2, vec![0.0, 2.0, 1.0, 0.0]).unwrap();
    // residuals: (1,0) and (-2,0.5) -> row sums 1 and 4.25 -> mean 2.625
    let loss = l2_loss(&x, &t).unwrap();
    assert_eq!(loss.item().unwrap(), 2.625);
}

/// The defining gradient identity: d/dx of the batch-mean squared error is
/// 2(x - target)/B, exactly.
#[test]
fn l2_gradient_is_two_residual_over_batch()
{
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = 4; // power of two so 1/B is exact
    let d = 3;
    let xv: Vec<f64> = (0..b * d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let tv: Vec<f64> = (0..b * d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let tape = Tape::new();
    let x = tracked(&tape, b, d, xv.clone());
    let t = Tensor::matrix(b, d, tv.clone()).unwrap();
    let g = l2_loss(&x, &t).unwrap().backward().unwrap();
    let gx = g.wrt(&x).unwrap();
    for i in 0..b * d {
        let want = 2.0 * (xv[i] - tv[i]) / b as f64;
        assert!(
            (gx[i] - want).abs() <= 1e-12 * want.abs().max(1.0),
            "element {i}: got {}, want {want}",
            gx[i]
        );
    }
}

/// Scaling the correction scales the gradient by exactly the same factor
/// (the loss is quadratic in the residual, its gradient linear).
#[test]
fn l2_gradient_is_linear_in_the_correction() {
    let xv = vec![0.5, -0.25, 1.5, 2.0];
    let delta = [0.3, -0.1, 0.7, 0.2];
    let c = 3.0;
    let grad_for = |scale: f64| -> Vec<f64> {
        let tape = Tape::new();
        let x = tracked(&tape, 2, 2, xv.clone());
        let tv: Vec<f64> = xv.iter().zip(&delta).map(|(x, d)| x + scale * d).collect();
        let t = Tensor::matrix(2, 2, tv).unwrap();
        let g = l2_loss(&x, &t).unwrap().backward().unwrap();
        g.wrt(&x).unwrap().to_vec()
    };
    let g1 = grad_for(1.0);
    let g3 = grad_for(c);
    for (a, b) in g1.iter().zip(&g3) {
        assert_close(*b, c * a, 1e-12, "gradient scales with the correction");
    }
}

#[test]
fn huber_default_constant() {
    let c = default_huber_c(2);
    assert_eq!(c, 0.00054 * 2f64.sqrt());
    assert_close(c, 7.637e-4, 1e-4, "quoted d=2 value");
    assert!(default_huber_c(8) > default_huber_c(2));
}

#[test]
fn huber_value_and_zero_residual() {
    let tape = Tape::new();
    let x = tracked(&tape, 1, 2, vec![3.0, 0.0]);
    let t = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
    let c = 0.5;
    let loss = huber_loss(&x, &t, c).unwrap().item().unwrap();
    assert_close(loss, (9.0f64 + 0.25).sqrt() - 0.5, 1e-9, "single-sample value");

    // Zero residual: only the sqrt regulariser epsilon remains.
    let tape = Tape::new();
    let x = tracked(&tape, 1, 2, vec![0.7, -0.2]);
    let t = Tensor::matrix(1, 2, vec![0.7, -0.2]).unwrap();
    let loss = huber_loss(&x, &t, default_huber_c(2)).unwrap().item().unwrap();
    assert!(loss.abs() <= 1e-9, "zero-residual loss {loss} should be ~0");
}

#[test]
fn huber_rejects_nonpositive_constant() {
    let tape = Tape::new();
    let x = tracked(&tape, 1, 2, vec![1.0, 2.0]);
    let t = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
    assert!(huber_loss(&x, &t, 0.0).is_err());
    assert!(huber_loss(&x, &t, -1.0).is_err());
    assert!(huber_loss(&x, &t, f64::NAN).is_err());
}

/// Per-sample gradients of the pseudo-Huber loss point exactly along the
/// squared-loss gradients; only the (positive) magnitude differs.
#[test]
fn huber_gradient_is_parallel_to_l2_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (b, d) = (6, 3);
    let xv: Vec<f64> = (0..b * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let tv: Vec<f64> = (0..b * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();

    let grad_of = |huber: bool| -> Vec<f64> {
        let tape = Tape::new();
        let x = tracked(&tape, b, d, xv.clone());
        let t = Tensor::matrix(b, d, tv.clone()).unwrap();
        let loss = if huber {
            huber_loss(&x, &t, 0.1).unwrap()
        } else {
            l2_loss(&x, &t).unwrap()
        };
        let g = loss.backward().unwrap();
        g.wrt(&x).unwrap().to_vec()
    };
    let gh = grad_of(true);
    let gl = grad_of(false);
    for s in 0..b {
        let hs = &gh[s * d..(s + 1) * d];
        let ls = &gl[s * d..(s + 1) * d];
        let dot: f64 = hs.iter().zip(ls).map(|(a, b)| a * b).sum();
        let nh: f64 = hs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nl: f64 = ls.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(nh > 0.0 && nl > 0.0);
        assert!(
            dot / (nh * nl) >= 1.0 - 1e-10,
            "sample {s}: cosine {} below 1",
            dot / (nh * nl)
        );
    }
}

/// With one sample the Huber gradient norm is ||r|| / sqrt(||r||^2 + c^2):
/// strictly below 1 everywhere, approaching 1 for huge residuals.
#[test]
fn huber_gradient_norm_saturates_at_one() {
    let c = 0.1;
    let norm_for = |r: Vec<f64>| -> f64 {
        let d = r.len();
        let tape = Tape::new();
        let x = tracked(&tape, 1, d, r);
        let t = Tensor::matrix(1, d, vec![0.0; d]).unwrap();
        let g = huber_loss(&x, &t, c).unwrap().backward().unwrap();
        g.wrt(&x).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    for r in [vec![0.01, 0.0], vec![0.3, -0.4], vec![5.0, 12.0]] {
        let rn: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let got = norm_for(r);
        let want = rn / (rn * rn + c * c).sqrt();
        assert_close(got, want, 1e-9, "analytic gradient norm");
        assert!(got < 1.0);
    }
    assert!(norm_for(vec![1e6, 0.0]) > 0.999_999);
}

#[test]
fn revised_target_reduces_to_denoiser_difference() {
    let x = vec![1.0, -2.0, 0.5, 0.25];
    let f_real = vec![0.2, 0.1, -0.3, 0.4];
    let f_fake = vec![0.1, 0.3, -0.3, 0.15];
    let out = revised_target(&x, &f_real, &f_fake, 2, LambdaRule::Sigma2).unwrap();
    for i in 0..4 {
        assert_eq!(out[i], x[i] + (f_real[i] - f_fake[i]));
    }

    // Equal denoisers: zero correction, the state itself comes back.
    let same = revised_target(&x, &f_real, &f_real, 2, LambdaRule::Sigma2).unwrap();
    assert_eq!(same, x);
}

/// The sigma^2 rule is the score-space update in disguise: applying
/// lambda = sigma_tau^2 to the score difference recovers the same target.
#[test]
fn revised_target_agrees_with_explicit_score_route() {
    let sigma_tau = 2.0;
    let x_tau = vec![0.6, -1.1, 2.2, 0.3];
    let x_base = vec![0.5, -1.0, 2.0, 0.4];
    let f_real = vec![0.2, 0.1, -0.3, 0.4];
    let f_fake = vec![0.1, 0.3, -0.3, 0.15];
    let s_real = score_from_denoiser(&x_tau, &f_real, sigma_tau).unwrap();
    let s_fake = score_from_denoiser(&x_tau, &f_fake, sigma_tau).unwrap();
    let got = revised_target(&x_base, &f_real, &f_fake, 2, LambdaRule::Sigma2).unwrap();
    for i in 0..4 {
        let want = x_base[i] + sigma_tau * sigma_tau * (s_real[i] - s_fake[i]);
        assert_close(got[i], want, 1e-10, "score-route target");
    }

    // sigma_tau = 2, score difference 0.25 per coordinate -> correction 1.
    let s_diff = 0.25;
    let f_r = vec![sigma_tau * sigma_tau * s_diff, 0.0];
    let f_f = vec![0.0, 0.0];
    let out = revised_target(&[0.0, 0.0], &f_r, &f_f, 2, LambdaRule::Sigma2).unwrap();
    assert_close(out[0], 1.0, 1e-12, "lambda = 4 times 0.25");
}

#[test]
fn dmd_norm_divides_by_per_sample_mean_absolute_difference() {
    // Row 1 difference (3, 1): mean abs 2. Row 2 difference (0.5, -0.5):
    // mean abs 0.5.
    let x = vec![0.0, 0.0, 1.0, 1.0];
    let f_real = vec![3.0, 1.0, 0.5, -0.5];
    let f_fake = vec![0.0, 0.0, 0.0, 0.0];
    let out = revised_target(&x, &f_real, &f_fake, 2, LambdaRule::DmdNorm).unwrap();
    assert_close(out[0], 3.0 / 2.0, 1e-9, "row 1 coord 1");
    assert_close(out[1], 1.0 / 2.0, 1e-9, "row 1 coord 2");
    assert_close(out[2], 1.0 + 0.5 / 0.5, 1e-9, "row 2 coord 1");
    assert_close(out[3], 1.0 - 0.5 / 0.5, 1e-9, "row 2 coord 2");
}

#[test]
fn revised_target_validates_shapes() {
    assert!(revised_target(&[0.0; 4], &[0.0; 3], &[0.0; 4], 2, LambdaRule::Sigma2).is_err());
    assert!(revised_target(&[0.0; 3], &[0.0; 3], &[0.0; 3], 2, LambdaRule::Sigma2).is_err());
}

#[test]
fn fake_loss_is_zero_against_own_prediction() {
    let net = gauss_teacher(2, 16, 1.0, 3);
    let tape = Tape::new();
    let bound = net.bind(&tape).unwrap();
    let x_tau = vec![0.4, -0.8, 1.2, 0.1];
    let pred = net
        .forward(
            &Tensor::matrix(2, 2, x_tau.clone()).unwrap(),
            SigmaQuery::Shared(0.7),
            None,
        )
        .unwrap();
    let loss = fake_score_loss(&bound, &x_tau, pred.data(), &[1.0, 1.0], 0.7, None)
        .unwrap()
        .item()
        .unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn fake_loss_applies_weights_per_sample() {
    let net = gauss_teacher(2, 16, 1.0, 4);
    let x_tau = vec![0.4, -0.8, 1.2, 0.1];
    let clean = vec![0.0, 0.0, 0.5, -0.5];

    let loss_with = |w: &[f64]| -> f64 {
        let tape = Tape::new();
        let bound = net.bind(&tape).unwrap();
        fake_score_loss(&bound, &x_tau, &clean, w, 0.7, None).unwrap().item().unwrap()
    };
    // Per-sample squared residuals via the frozen forward.
    let pred = net
        .forward(
            &Tensor::matrix(2, 2, x_tau.clone()).unwrap(),
            SigmaQuery::Shared(0.7),
            None,
        )
        .unwrap();
    let rs: Vec<f64> = (0..2)
        .map(|b| {
            (0..2)
                .map(|j| {
                    let r = pred.data()[b * 2 + j] - clean[b * 2 + j];
                    r * r
                })
                .sum()
        })
        .collect();

    assert_close(loss_with(&[1.0, 1.0]), (rs[0] + rs[1]) / 2.0, 1e-12, "unit weights");
    assert_close(loss_with(&[2.0, 0.0]), rs[0], 1e-12, "weights (2, 0)");
    assert_close(
        loss_with(&[0.3, 1.7]),
        (0.3 * rs[0] + 1.7 * rs[1]) / 2.0,
        1e-12,
        "fractional weights",
    );
}

#[test]
fn fake_loss_gradients_reach_the_parameters() {
    let net = gauss_teacher(2, 16, 1.0, 5);
    let tape = Tape::new();
    let bound = net.bind(&tape).unwrap();
    let loss = fake_score_loss(
        &bound,
        &[0.4, -0.8, 1.2, 0.1],
        &[0.0, 0.0, 0.5, -0.5],
        &[1.0, 1.0],
        0.7,
        None,
    )
    .unwrap();
    let grads = bound.grads(&loss.backward().unwrap());
    let norm: f64 = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm > 0.0, "some parameter gradient must be nonzero");
}

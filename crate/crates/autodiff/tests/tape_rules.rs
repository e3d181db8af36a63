//! Tape lifecycle and error-path contracts.

use tdm_autodiff::{AutodiffError, Tape, Tensor};

#[test]
fn backward_consumes_the_tape() {
    let tape = Tape::new();
    let x = Tensor::leaf(&tape, vec![2], vec![1.0, 2.0]).unwrap();
    let loss = x.mul(&x).unwrap().sum_all().unwrap();
    loss.backward().unwrap();

    assert!(matches!(loss.backward(), Err(AutodiffError::TapeConsumed)));
    // recording new ops against the consumed tape is also rejected
    assert!(matches!(x.silu(), Err(AutodiffError::TapeConsumed)));
}

#[test]
fn backward_requires_scalar_loss() {
    let tape = Tape::new();
    let x = Tensor::leaf(&tape, vec![2], vec![1.0, 2.0]).unwrap();
    let y = x.silu().unwrap();
    match y.backward() {
        Err(AutodiffError::NonScalarLoss { shape }) => assert_eq!(shape, vec![2]),
        other => panic!("expected NonScalarLoss, got {other:?}"),
    }
}

#[test]
fn backward_on_untracked_tensor_errors() {
    let c = Tensor::scalar(1.0).unwrap();
    assert!(matches!(c.backward(), Err(AutodiffError::UntrackedTensor)));
}

#[test]
fn cotangent_length_is_checked() {
    let tape = Tape::new();
    let x = Tensor::leaf(&tape, vec![3], vec![1.0, 2.0, 3.0]).unwrap();
    let y = x.silu().unwrap();
    assert!(matches!(
        y.backward_with(&[1.0, 1.0]),
        Err(AutodiffError::CotangentLength { got: 2, want: 3 })
    ));
}

#[test]
fn shape_mismatches_are_rejected() {
    let a = Tensor::matrix(2, 3, vec![0.0; 6]).unwrap();
    let b = Tensor::matrix(2, 3, vec![0.0; 6]).unwrap();
    assert!(matches!(a.matmul(&b), Err(AutodiffError::ShapeMismatch { .. })));

    let v = Tensor::vector(vec![1.0, 2.0]).unwrap();
    assert!(matches!(a.add(&v), Err(AutodiffError::ShapeMismatch { .. })));
    assert!(matches!(a.mul(&v), Err(AutodiffError::ShapeMismatch { .. })));
    assert!(matches!(a.scale_rows(&Tensor::vector(vec![1.0; 3]).unwrap()), Err(AutodiffError::ShapeMismatch { .. })));

    assert!(matches!(v.row_sum(), Err(AutodiffError::UnsupportedShape { .. })));
    assert!(matches!(
        Tensor::constant(vec![2, 2], vec![1.0]),
        Err(AutodiffError::ShapeMismatch { .. })
    ));
}

#[test]
fn operands_from_different_tapes_are_rejected() {
    let ta = Tape::new();
    let tb = Tape::new();
    let a = Tensor::leaf(&ta, vec![2], vec![1.0, 2.0]).unwrap();
    let b = Tensor::leaf(&tb, vec![2], vec![3.0, 4.0]).unwrap();
    assert!(matches!(a.add(&b), Err(AutodiffError::TapeMismatch { op: "add" })));
}

#[test]
fn non_finite_values_are_caught_at_the_producing_op() {
    // overflow to +inf inside `mul`
    let big = Tensor::vector(vec![1e308]).unwrap();
    match big.mul(&big) {
        Err(AutodiffError::NonFinite { op }) => assert_eq!(op, "mul"),
        other => panic!("expected NonFinite, got {other:?}"),
    }
    // NaN rejected at construction
    assert!(matches!(
        Tensor::vector(vec![f64::NAN]),
        Err(AutodiffError::NonFinite { .. })
    ));
    assert!(matches!(
        Tensor::vector(vec![f64::INFINITY]),
        Err(AutodiffError::NonFinite { .. })
    ));
}

#[test]
fn detach_blocks_gradient_flow() {
    let tape = Tape::new();
    let x = Tensor::leaf(&tape, vec![2], vec![1.0, 2.0]).unwrap();
    let d = x.mul(&x).unwrap().detach();
    assert!(!d.is_tracked());

    // loss = x·detach(x²): gradient treats the detached factor as constant.
    let loss = x.mul(&d).unwrap().sum_all().unwrap();
    let g = loss.backward().unwrap();
    assert_eq!(g.wrt(&x).unwrap(), &[1.0, 4.0]);
    assert!(g.wrt(&d).is_none());
}

#[test]
fn gradients_are_scoped_to_their_tape() {
    let ta = Tape::new();
    let a = Tensor::leaf(&ta, vec![1], vec![2.0]).unwrap();
    let ga = a.mul(&a).unwrap().sum_all().unwrap().backward().unwrap();

    let tb = Tape::new();
    let b = Tensor::leaf(&tb, vec![1], vec![2.0]).unwrap();
    assert!(ga.wrt(&b).is_none(), "foreign-tape lookup must miss");
    assert_eq!(ga.wrt(&a).unwrap(), &[4.0]);
}

#[test]
fn constants_stay_off_tape() {
    let tape = Tape::new();
    let _leaf = Tensor::leaf(&tape, vec![2], vec![1.0, 2.0]).unwrap();
    let n0 = tape.len();
    let c = Tensor::vector(vec![1.0, 2.0]).unwrap();
    let d = c.silu().unwrap().sum_all().unwrap();
    assert!(!d.is_tracked());
    assert_eq!(tape.len(), n0, "constant-only ops must not record nodes");
}

#[test]
fn leaves_without_flow_report_no_gradient() {
    let tape = Tape::new();
    let used = Tensor::leaf(&tape, vec![1], vec![1.0]).unwrap();
    let unused = Tensor::leaf(&tape, vec![3], vec![1.0, 2.0, 3.0]).unwrap();
    let g = used.mul(&used).unwrap().sum_all().unwrap().backward().unwrap();
    assert!(g.wrt(&unused).is_none());
    assert_eq!(g.wrt_or_zeros(&unused), vec![0.0; 3]);
}

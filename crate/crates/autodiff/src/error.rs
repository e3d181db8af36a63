use thiserror::Error;

/// Errors surfaced by tensor ops, the tape, and the optimizer.
#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in `{op}`: lhs {lhs:?} vs rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("`{op}` does not support operand shape {shape:?}")]
    UnsupportedShape { op: &'static str, shape: Vec<usize> },

    #[error("`{op}` produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("operands of `{op}` are recorded on different tapes")]
    TapeMismatch { op: &'static str },

    #[error("tape was already consumed by a backward pass")]
    TapeConsumed,

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("backward requires a tensor recorded on a tape")]
    UntrackedTensor,

    #[error("cotangent has length {got}, tensor has {want} elements")]
    CotangentLength { got: usize, want: usize },

    #[error("parameter/gradient count mismatch: {params} params vs {grads} grads")]
    ParamGradMismatch { params: usize, grads: usize },
}

pub type Result<T, E = AutodiffError> = std::result::Result<T, E>;

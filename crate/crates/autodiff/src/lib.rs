//! Reverse-mode automatic differentiation on f64 tensors, sized for small
//! MLPs on low-dimensional data.
//!
//! Design points:
//! - single dynamic tape per forward pass; ops on constants stay off-tape, so
//!   training and inference share one numeric path;
//! - every op validates shapes and scans its output for non-finite values;
//! - `backward` consumes the tape (a second pass, or recording after the
//!   pass, errors) and visits each node exactly once in reverse creation
//!   order;
//! - [`Tensor::backward_with`] seeds the sweep with an explicit cotangent at
//!   an interior node, which lets callers realize custom chain-rule products
//!   without extra ops.

mod error;
mod linalg;
mod optim;
mod tape;
mod tensor;

pub use error::{AutodiffError, Result};
pub use linalg::{matmul, sigmoid};
pub use optim::{AdamW, AdamWConfig, StepOutcome};
pub use tape::{Gradients, Tape};
pub use tensor::Tensor;

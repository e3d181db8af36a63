//! Dense f64 tensors (rank 0–2) with optional tape tracking.
//!
//! A tensor is a shape plus shared immutable storage. Ops involving at least
//! one tracked operand record a node on that operand's tape; ops on plain
//! constants stay off-tape, so inference and training share one code path.

use std::sync::Arc;

use crate::error::{AutodiffError, Result};
use crate::linalg;
use crate::tape::{Gradients, Op, Operand, Tape};

#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
    node: Option<(Tape, usize)>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .field("tracked", &self.node.is_some())
            .finish()
    }
}

impl Tensor {
    /// Untracked tensor. Rejects shape/length mismatches and non-finite data.
    pub fn constant(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(AutodiffError::ShapeMismatch {
                op: "constant",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        check_finite("constant", &data)?;
        Ok(Self {
            shape,
            data: Arc::new(data),
            node: None,
        })
    }

    /// Untracked tensor sharing existing storage (no copy, no finite scan —
    /// for re-wrapping values that already passed through checked ops).
    pub fn from_shared(shape: Vec<usize>, data: Arc<Vec<f64>>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(AutodiffError::ShapeMismatch {
                op: "from_shared",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Self { shape, data, node: None })
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::constant(vec![], vec![v])
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::constant(vec![n], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::constant(vec![rows, cols], data)
    }

    /// Tracked leaf on `tape` (parameters and differentiable inputs).
    pub fn leaf(tape: &Tape, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let t = Self::constant(shape, data)?;
        t.track(tape)
    }

    /// Leaf sharing existing storage (parameters held behind `Arc`).
    pub fn leaf_shared(tape: &Tape, shape: Vec<usize>, data: Arc<Vec<f64>>) -> Result<Self> {
        let t = Self::from_shared(shape, data)?;
        t.track(tape)
    }

    fn track(mut self, tape: &Tape) -> Result<Self> {
        let id = tape.push(Op::Leaf, self.data.len())?;
        self.node = Some((tape.clone(), id));
        Ok(self)
    }

    // ── accessors ──

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn shared_data(&self) -> Arc<Vec<f64>> {
        self.data.clone()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// Scalar value; errors on non-scalars.
    pub fn item(&self) -> Result<f64> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(AutodiffError::NonScalarLoss {
                shape: self.shape.clone(),
            })
        }
    }

    pub(crate) fn node_ref(&self) -> Option<(&Tape, usize)> {
        self.node.as_ref().map(|(t, i)| (t, *i))
    }

    /// Same values, no tape: gradient flow stops here.
    pub fn detach(&self) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.clone(),
            node: None,
        }
    }

    fn operand(&self) -> Operand {
        Operand {
            id: self.node.as_ref().map(|(_, i)| *i),
            data: self.data.clone(),
        }
    }

    /// Tape shared by the operands, if any (error when two operands are
    /// tracked on different tapes).
    fn merged_tape<'a>(op: &'static str, ts: &[&'a Tensor]) -> Result<Option<&'a Tape>> {
        let mut found: Option<&Tape> = None;
        for t in ts {
            if let Some((tape, _)) = &t.node {
                match found {
                    None => found = Some(tape),
                    Some(f) => {
                        if !Tape::same_tape(f, tape) {
                            return Err(AutodiffError::TapeMismatch { op });
                        }
                    }
                }
            }
        }
        Ok(found)
    }

    fn finish(
        name: &'static str,
        tape: Option<&Tape>,
        op: Op,
        shape: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Tensor> {
        check_finite(name, &data)?;
        let data = Arc::new(data);
        let node = match tape {
            Some(tape) => {
                let id = tape.push(op, data.len())?;
                Some((tape.clone(), id))
            }
            None => None,
        };
        Ok(Tensor { shape, data, node })
    }

    // ── ops ──

    /// `self (m×k) · rhs (k×n)`; a rank-1 rhs of length k acts as a column,
    /// yielding a rank-1 result of length m.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k1) = match self.shape[..] {
            [m, k] => (m, k),
            [k] => (1, k),
            _ => {
                return Err(AutodiffError::UnsupportedShape {
                    op: "matmul",
                    shape: self.shape.clone(),
                })
            }
        };
        let (k2, n, rhs_vec) = match rhs.shape[..] {
            [k, n] => (k, n, false),
            [k] => (k, 1, true),
            _ => {
                return Err(AutodiffError::UnsupportedShape {
                    op: "matmul",
                    shape: rhs.shape.clone(),
                })
            }
        };
        if k1 != k2 {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let out = linalg::matmul(&self.data, &rhs.data, m, k1, n);
        let out_shape = match (self.shape.len(), rhs_vec) {
            (1, _) => vec![n],       // (k)·(k,n) → (n)
            (_, true) => vec![m],    // (m,k)·(k) → (m)
            _ => vec![m, n],
        };
        let tape = Self::merged_tape("matmul", &[self, rhs])?;
        Self::finish(
            "matmul",
            tape,
            Op::Matmul {
                a: self.operand(),
                b: rhs.operand(),
                m,
                k: k1,
                n,
            },
            out_shape,
            out,
        )
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.add_sub(rhs, false)
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.add_sub(rhs, true)
    }

    fn add_sub(&self, rhs: &Tensor, is_sub: bool) -> Result<Tensor> {
        let name = if is_sub { "sub" } else { "add" };
        let bcast_cols = match (&self.shape[..], &rhs.shape[..]) {
            (a, b) if a == b => false,
            // (m,n) ± (n): rhs broadcast over rows (bias add)
            ([_, n], [bn]) if n == bn => true,
            _ => {
                return Err(AutodiffError::ShapeMismatch {
                    op: name,
                    lhs: self.shape.clone(),
                    rhs: rhs.shape.clone(),
                })
            }
        };
        let mut out = self.data.as_ref().clone();
        if bcast_cols {
            let cols = rhs.data.len();
            for row in out.chunks_exact_mut(cols) {
                for (o, &b) in row.iter_mut().zip(rhs.data.iter()) {
                    if is_sub {
                        *o -= b;
                    } else {
                        *o += b;
                    }
                }
            }
        } else {
            for (o, &b) in out.iter_mut().zip(rhs.data.iter()) {
                if is_sub {
                    *o -= b;
                } else {
                    *o += b;
                }
            }
        }
        let tape = Self::merged_tape(name, &[self, rhs])?;
        let op = if is_sub {
            Op::Sub {
                a: self.operand(),
                b: rhs.operand(),
                bcast_cols,
            }
        } else {
            Op::Add {
                a: self.operand(),
                b: rhs.operand(),
                bcast_cols,
            }
        };
        Self::finish(name, tape, op, self.shape.clone(), out)
    }

    /// Elementwise product; shapes must match exactly.
    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.shape != rhs.shape {
            return Err(AutodiffError::ShapeMismatch {
                op: "mul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let out: Vec<f64> = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(&a, &b)| a * b)
            .collect();
        let tape = Self::merged_tape("mul", &[self, rhs])?;
        Self::finish(
            "mul",
            tape,
            Op::Mul {
                a: self.operand(),
                b: rhs.operand(),
            },
            self.shape.clone(),
            out,
        )
    }

    pub fn scale(&self, c: f64) -> Result<Tensor> {
        if !c.is_finite() {
            return Err(AutodiffError::NonFinite { op: "scale" });
        }
        let out: Vec<f64> = self.data.iter().map(|&a| a * c).collect();
        let tape = Self::merged_tape("scale", &[self])?;
        Self::finish(
            "scale",
            tape,
            Op::Scale {
                a: self.operand(),
                c,
            },
            self.shape.clone(),
            out,
        )
    }

    pub fn add_scalar(&self, c: f64) -> Result<Tensor> {
        if !c.is_finite() {
            return Err(AutodiffError::NonFinite { op: "add_scalar" });
        }
        let out: Vec<f64> = self.data.iter().map(|&a| a + c).collect();
        let tape = Self::merged_tape("add_scalar", &[self])?;
        Self::finish(
            "add_scalar",
            tape,
            Op::AddScalar { a: self.operand() },
            self.shape.clone(),
            out,
        )
    }

    /// `x · sigmoid(x)` elementwise.
    pub fn silu(&self) -> Result<Tensor> {
        let out: Vec<f64> = self
            .data
            .iter()
            .map(|&x| x * linalg::sigmoid(x))
            .collect();
        let tape = Self::merged_tape("silu", &[self])?;
        Self::finish(
            "silu",
            tape,
            Op::Silu { a: self.operand() },
            self.shape.clone(),
            out,
        )
    }

    /// `sqrt(x + 1e-12)`: the stabilized square root used by the pseudo-Huber
    /// loss, with a finite derivative at x = 0.
    pub fn sqrt_eps(&self) -> Result<Tensor> {
        const EPS: f64 = 1e-12;
        let out: Vec<f64> = self.data.iter().map(|&x| (x + EPS).sqrt()).collect();
        let out_arc = Arc::new(out.clone());
        let tape = Self::merged_tape("sqrt_eps", &[self])?;
        Self::finish(
            "sqrt_eps",
            tape,
            Op::SqrtEps {
                a: self.operand(),
                out: out_arc,
            },
            self.shape.clone(),
            out,
        )
    }

    /// Column-concatenate rank-2 tensors with equal row counts.
    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(AutodiffError::UnsupportedShape {
                op: "concat_cols",
                shape: vec![],
            });
        }
        let rows = match parts[0].shape[..] {
            [r, _] => r,
            _ => {
                return Err(AutodiffError::UnsupportedShape {
                    op: "concat_cols",
                    shape: parts[0].shape.clone(),
                })
            }
        };
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            match p.shape[..] {
                [r, c] if r == rows => widths.push(c),
                _ => {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "concat_cols",
                        lhs: parts[0].shape.clone(),
                        rhs: p.shape.clone(),
                    })
                }
            }
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; rows * total];
        let mut col0 = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            for r in 0..rows {
                out[r * total + col0..r * total + col0 + w]
                    .copy_from_slice(&p.data[r * w..(r + 1) * w]);
            }
            col0 += w;
        }
        let tape = Self::merged_tape("concat_cols", parts)?;
        let op = Op::Concat {
            rows,
            parts: parts
                .iter()
                .zip(&widths)
                .map(|(p, &w)| (p.operand(), w))
                .collect(),
        };
        Self::finish("concat_cols", tape, op, vec![rows, total], out)
    }

    /// Per-row sum: (m,n) → (m). The per-sample reduction used by batched
    /// losses.
    pub fn row_sum(&self) -> Result<Tensor> {
        let (rows, cols) = match self.shape[..] {
            [r, c] => (r, c),
            _ => {
                return Err(AutodiffError::UnsupportedShape {
                    op: "row_sum",
                    shape: self.shape.clone(),
                })
            }
        };
        let out: Vec<f64> = self
            .data
            .chunks_exact(cols)
            .map(|row| row.iter().sum())
            .collect();
        let tape = Self::merged_tape("row_sum", &[self])?;
        Self::finish(
            "row_sum",
            tape,
            Op::RowSum {
                a: self.operand(),
                rows,
                cols,
            },
            vec![rows],
            out,
        )
    }

    pub fn sum_all(&self) -> Result<Tensor> {
        let s: f64 = self.data.iter().sum();
        let tape = Self::merged_tape("sum", &[self])?;
        Self::finish("sum", tape, Op::SumAll { a: self.operand() }, vec![], vec![s])
    }

    pub fn mean_all(&self) -> Result<Tensor> {
        let s: f64 = self.data.iter().sum();
        let m = s / self.data.len() as f64;
        let tape = Self::merged_tape("mean", &[self])?;
        Self::finish("mean", tape, Op::MeanAll { a: self.operand() }, vec![], vec![m])
    }

    /// Scale row r of a (m,n) tensor by `factors[r]`.
    pub fn scale_rows(&self, factors: &Tensor) -> Result<Tensor> {
        let (rows, cols) = match self.shape[..] {
            [r, c] => (r, c),
            _ => {
                return Err(AutodiffError::UnsupportedShape {
                    op: "scale_rows",
                    shape: self.shape.clone(),
                })
            }
        };
        if factors.shape[..] != [rows] {
            return Err(AutodiffError::ShapeMismatch {
                op: "scale_rows",
                lhs: self.shape.clone(),
                rhs: factors.shape.clone(),
            });
        }
        let mut out = self.data.as_ref().clone();
        for (r, row) in out.chunks_exact_mut(cols).enumerate() {
            let f = factors.data[r];
            for v in row {
                *v *= f;
            }
        }
        let tape = Self::merged_tape("scale_rows", &[self, factors])?;
        Self::finish(
            "scale_rows",
            tape,
            Op::ScaleRows {
                x: self.operand(),
                f: factors.operand(),
                rows,
                cols,
            },
            self.shape.clone(),
            out,
        )
    }

    // ── backward ──

    /// Reverse pass from a scalar loss. Consumes the tape.
    pub fn backward(&self) -> Result<Gradients> {
        if !self.is_scalar() {
            return Err(AutodiffError::NonScalarLoss {
                shape: self.shape.clone(),
            });
        }
        self.backward_with(&[1.0])
    }

    /// Reverse pass seeded with an explicit cotangent at this (not
    /// necessarily scalar) tensor. Consumes the tape.
    pub fn backward_with(&self, cotangent: &[f64]) -> Result<Gradients> {
        let (tape, id) = match &self.node {
            Some((t, i)) => (t, *i),
            None => return Err(AutodiffError::UntrackedTensor),
        };
        tape.backward_seeded(id, cotangent.to_vec())
    }
}

fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AutodiffError::NonFinite { op })
    }
}

//! Dynamic tape: every op on tracked tensors appends one node; `backward`
//! replays the nodes once in reverse creation order.

use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use crate::error::{AutodiffError, Result};
use crate::linalg;
use crate::tensor::Tensor;

/// Shared recording surface. Cloning is cheap (reference-counted); all clones
/// refer to the same node list.
#[derive(Clone, Default)]
pub struct Tape {
    pub(crate) inner: Rc<RefCell<TapeInner>>,
}

#[derive(Default)]
pub(crate) struct TapeInner {
    pub(crate) nodes: Vec<Node>,
    pub(crate) consumed: bool,
}

/// One recorded operand: the input's node id (if it was tracked) plus a
/// snapshot of its values for the backward formulas.
pub(crate) struct Operand {
    pub(crate) id: Option<usize>,
    pub(crate) data: Arc<Vec<f64>>,
}

pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) out_len: usize,
}

pub(crate) enum Op {
    Leaf,
    Matmul { a: Operand, b: Operand, m: usize, k: usize, n: usize },
    Add { a: Operand, b: Operand, bcast_cols: bool },
    Sub { a: Operand, b: Operand, bcast_cols: bool },
    Mul { a: Operand, b: Operand },
    Scale { a: Operand, c: f64 },
    AddScalar { a: Operand },
    Silu { a: Operand },
    SqrtEps { a: Operand, out: Arc<Vec<f64>> },
    Concat { rows: usize, parts: Vec<(Operand, usize)> },
    RowSum { a: Operand, rows: usize, cols: usize },
    SumAll { a: Operand },
    MeanAll { a: Operand },
    ScaleRows { x: Operand, f: Operand, rows: usize, cols: usize },
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True once a backward pass has run; further recording is an error.
    pub fn is_consumed(&self) -> bool {
        self.inner.borrow().consumed
    }

    pub(crate) fn same_tape(a: &Tape, b: &Tape) -> bool {
        Rc::ptr_eq(&a.inner, &b.inner)
    }

    pub(crate) fn push(&self, op: Op, out_len: usize) -> Result<usize> {
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(AutodiffError::TapeConsumed);
        }
        inner.nodes.push(Node { op, out_len });
        Ok(inner.nodes.len() - 1)
    }

    /// Reverse pass seeded with `cot` at node `seed`. Consumes the tape:
    /// a second call (or recording a new op) errors.
    pub(crate) fn backward_seeded(&self, seed: usize, cot: Vec<f64>) -> Result<Gradients> {
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(AutodiffError::TapeConsumed);
        }
        inner.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; inner.nodes.len()];
        if cot.len() != inner.nodes[seed].out_len {
            return Err(AutodiffError::CotangentLength {
                got: cot.len(),
                want: inner.nodes[seed].out_len,
            });
        }
        grads[seed] = Some(cot);

        // Creation order is topological, so one reverse sweep visits each node
        // exactly once with its full adjoint accumulated.
        for i in (0..=seed).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &inner.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g); // keep leaf adjoints for `wrt`
              }
                Op::Matmul { a, b, m, k, n } => {
                    if let Some(ida) = a.id {
                        let da = linalg::matmul_a_bt(&g, &b.data, *m, *n, *k);
                        accumulate(&mut grads, ida, &da);
                    }
                    if let Some(idb) = b.id {
                        let db = linalg::matmul_at_b(&a.data, &g, *m, *k, *n);
                        accumulate(&mut grads, idb, &db);
                    }
                }
                Op::Add { a, b, bcast_cols } => {
                    if let Some(ida) = a.id {
                        accumulate(&mut grads, ida, &g);
                    }
                    if let Some(idb) = b.id {
                        if *bcast_cols {
                            let cols = b.data.len();
                            let mut db = vec![0.0; cols];
                            for row in g.chunks_exact(cols) {
                                for (d, &gv) in db.iter_mut().zip(row) {
                                    *d += gv;
                                }
                            }
                            accumulate(&mut grads, idb, &db);
                        } else {
                            accumulate(&mut grads, idb, &g);
                        }
                    }
                }
                Op::Sub { a, b, bcast_cols } => {
                    if let Some(ida) = a.id {
                        accumulate(&mut grads, ida, &g);
                    }
                    if let Some(idb) = b.id {
                        if *bcast_cols {
                            let cols = b.data.len();
                            let mut db = vec![0.0; cols];
                            for row in g.chunks_exact(cols) {
                                for (d, &gv) in db.iter_mut().zip(row) {
                                    *d -= gv;
                                }
                            }
                            accumulate(&mut grads, idb, &db);
                        } else {
                            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                            accumulate(&mut grads, idb, &neg);
                        }
                    }
                }
                Op::Mul { a, b } => {
                    if let Some(ida) = a.id {
                        let da: Vec<f64> = g.iter().zip(b.data.iter()).map(|(gv, bv)| gv * bv).collect();
                        accumulate(&mut grads, ida, &da);
                    }
                    if let Some(idb) = b.id {
                        let db: Vec<f64> = g.iter().zip(a.data.iter()).map(|(gv, av)| gv * av).collect();
                        accumulate(&mut grads, idb, &db);
                    }
                }
                Op::Scale { a, c } => {
                    if let Some(ida) = a.id {
                        let da: Vec<f64> = g.iter().map(|gv| gv * c).collect();
                        accumulate(&mut grads, ida, &da);
                    }
                }
                Op::AddScalar { a } => {
                    if let Some(ida) = a.id {
                        accumulate(&mut grads, ida, &g);
                    }
                }
                Op::Silu { a } => {
                    if let Some(ida) = a.id {
                        let da: Vec<f64> = g
                            .iter()
                            .zip(a.data.iter())
                            .map(|(gv, &x)| {
                                let s = linalg::sigmoid(x);
                                gv * (s * (1.0 + x * (1.0 - s)))
                            })
                            .collect();
                        accumulate(&mut grads, ida, &da);
                    }
                }
                Op::SqrtEps { a, out } => {
                    if let Some(ida) = a.id {
                        let da: Vec<f64> = g
                            .iter()
                            .zip(out.iter())
                            .map(|(gv, &y)| gv / (2.0 * y))
                            .collect();
                        accumulate(&mut grads, ida, &da);
                    }
                }
                Op::Concat { rows, parts } => {
                    let total: usize = parts.iter().map(|(_, w)| w).sum();
                    let mut col0 = 0usize;
                    for (part, width) in parts {
                        if let Some(idp) = part.id {
                            let mut dp = vec![0.0; rows * width];
                            for r in 0..*rows {
                                let src = &g[r * total + col0..r * total + col0 + width];
                                dp[r * width..(r + 1) * width].copy_from_slice(src);
                            }
                            accumulate(&mut grads, idp, &dp);
                        }
                        col0 += width;
                    }
                }
                Op::RowSum { a, rows, cols } => {
                    if let Some(ida) = a.id {
                        let mut da = vec![0.0; rows * cols];
                        for r in 0..*rows {
                            let gv = g[r];
                            for d in &mut da[r * cols..(r + 1) * cols] {
                                *d += gv;
                            }
                        }
                        accumulate(&mut grads, ida, &da);
                    }
                }
                Op::SumAll { a } => {
                    if let Some(ida) = a.id {
                        let da = vec![g[0]; a.data.len()];
                        accumulate(&mut grads, ida, &da);
                    }
                }
                Op::MeanAll { a } => {
                    if let Some(ida) = a.id {
                        let v = g[0] / a.data.len() as f64;
                        let da = vec![v; a.data.len()];
                        accumulate(&mut grads, ida, &da);
                    }
                }
                Op::ScaleRows { x, f, rows, cols } => {
                    if let Some(idx) = x.id {
                        let mut dx = vec![0.0; rows * cols];
                        for r in 0..*rows {
                            let fv = f.data[r];
                            for (d, gv) in dx[r * cols..(r + 1) * cols]
                                .iter_mut()
                                .zip(&g[r * cols..(r + 1) * cols])
                            {
                                *d += gv * fv;
                            }
                        }
                        accumulate(&mut grads, idx, &dx);
                    }
                    if let Some(idf) = f.id {
                        let mut df = vec![0.0; *rows];
                        for r in 0..*rows {
                            let mut acc = 0.0;
                            for (gv, xv) in g[r * cols..(r + 1) * cols]
                                .iter()
                                .zip(&x.data[r * cols..(r + 1) * cols])
                            {
                                acc += gv * xv;
                            }
                            df[r] = acc;
                        }
                        accumulate(&mut grads, idf, &df);
                    }
                }
            }
        }

        Ok(Gradients {
            tape: self.clone(),
            grads,
        })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: usize, contrib: &[f64]) {
    match &mut grads[id] {
        Some(g) => {
            for (gv, &c) in g.iter_mut().zip(contrib) {
                *gv += c;
            }
        }
        slot @ None => *slot = Some(contrib.to_vec()),
    }
}

/// Adjoints from one backward pass, addressable by the tensors that produced
/// them.
pub struct Gradients {
    tape: Tape,
    grads: Vec<Option<Vec<f64>>>,
}

impl std::fmt::Debug for Gradients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gradients")
            .field("nodes", &self.grads.len())
            .finish()
    }
}

impl Gradients {
    /// Gradient of the loss w.r.t. `t`, or `None` if `t` is untracked, lives
    /// on a different tape, or received no gradient flow.
    pub fn wrt(&self, t: &Tensor) -> Option<&[f64]> {
        let (tape, id) = t.node_ref()?;
        if !Tape::same_tape(tape, &self.tape) {
            return None;
        }
        self.grads.get(id)?.as_deref()
    }

    /// Like [`wrt`](Self::wrt) but fills in zeros when no gradient flowed.
    pub fn wrt_or_zeros(&self, t: &Tensor) -> Vec<f64> {
        self.wrt(t).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.len()])
    }
}

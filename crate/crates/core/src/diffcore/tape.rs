// SPDX-License-Identifier: Apache-2.0

//! Operation recording and the reverse sweep.

use std::cell::{Ref, RefCell};
use std::sync::Arc;

use super::sparse::SparseMatrix;
use super::tensor::{gemm, Tensor};
use super::TensorError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule attached to a recorded value.
#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Relu {
        x: Var,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        /// Batch statistics (train mode) couple rows in the backward pass.
        batch_stats: bool,
    },
    SegmentMean {
        x: Var,
        offsets: Arc<[usize]>,
    },
    SegmentMax {
        x: Var,
        /// Source row for every output element.
        argmax: Vec<usize>,
    },
    Propagate {
        x: Var,
        adj: Arc<SparseMatrix>,
    },
    ConcatCols {
        parts: Vec<(Var, usize)>,
    },
    GatherRows {
        table: Var,
        index: Arc<[usize]>,
    },
    Mse {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: f64,
    },
    Add {
        a: Var,
        b: Var,
    },
    Reshape {
        x: Var,
    },
    Sum {
        x: Var,
    },
}

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) value: Tensor,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
    /// Persistent gradient of a leaf; accumulates across backward calls.
    pub(crate) grad: Option<Vec<f64>>,
}

/// Wengert list of tensor operations.
///
/// Values are appended in evaluation order, so every op's inputs precede it.
/// [`Tape::backward`] walks the list once in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    pub(crate) nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Records a trainable leaf.
    pub fn leaf(&self, value: Tensor) -> Var {
        let n = value.numel();
        self.push_node(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
            grad: Some(vec![0.0; n]),
        })
    }

    /// Records a leaf that never receives gradient.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push_node(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
            grad: None,
        })
    }

    /// Copies `v` into a new constant leaf, severing the gradient path.
    pub fn detach(&self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    /// Value of a one-element tensor.
    pub fn item(&self, v: Var) -> Option<f64> {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        self.value(v).clone()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    /// Accumulated gradient of a trainable leaf.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let nodes = self.nodes.borrow();
        let node = &nodes[v.0];
        node.grad
            .as_ref()
            .map(|g| Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    pub fn zero_grad(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            if let Some(g) = node.grad.as_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    fn push_node(&self, node: Node) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var(nodes.len() - 1)
    }

    /// Records the result of an op after checking it is finite.
    pub(crate) fn push_op(
        &self,
        name: &'static str,
        value: Tensor,
        op: Op,
        inputs: &[Var],
    ) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite(name));
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|v| nodes[v.0].requires_grad)
        };
        Ok(self.push_node(Node {
            value,
            op,
            requires_grad,
            grad: None,
        }))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Adjoints are recomputed from scratch on every call and then added into
    /// the persistent gradients of trainable leaves, so calling this twice
    /// without [`Tape::zero_grad`] doubles them.
    pub fn backward(&self, loss: Var) -> Result<(), TensorError> {
        let mut leaf_grads: Vec<(usize, Vec<f64>)> = Vec::new();
        {
            let nodes = self.nodes.borrow();
            let loss_node = &nodes[loss.0];
            if loss_node.value.numel() != 1 || loss_node.value.rank() > 1 {
                return Err(TensorError::Rank {
                    op: "backward needs a scalar loss",
                    shape: loss_node.value.shape().to_vec(),
                });
            }
            if !loss_node.requires_grad {
                return Ok(());
            }
            let mut adj: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
            adj[loss.0] = Some(vec![1.0]);
            for i in (0..=loss.0).rev() {
                let Some(dy) = adj[i].take() else { continue };
                let node = &nodes[i];
                if !node.requires_grad {
                    continue;
                }
                if let Op::Leaf = node.op {
                    leaf_grads.push((i, dy));
                    continue;
                }
                backward_op(&nodes, node, &dy, &mut adj);
            }
        }
        let mut nodes = self.nodes.borrow_mut();
        for (i, g) in leaf_grads {
            if let Some(acc) = nodes[i].grad.as_mut() {
                for (a, d) in acc.iter_mut().zip(&g) {
                    *a += d;
                }
            }
        }
        Ok(())
    }
}

/// Adds `delta` into the adjoint slot of `v` if it participates in gradients.
fn accumulate(
    nodes: &[Node],
    adj: &mut [Option<Vec<f64>>],
    v: Var,
    delta: impl FnOnce(&mut [f64]),
) {
    if !nodes[v.0].requires_grad {
        return;
    }
    let slot = adj[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.numel()]);
    delta(slot);
}

fn backward_op(nodes: &[Node], node: &Node, dy: &[f64], adj: &mut [Option<Vec<f64>>]) {
    match &node.op {
        Op::Leaf => {}
        Op::Linear { x, w, b } => {
            let (n, d_in) = nodes[x.0].value.dims2().expect("linear input is a matrix");
            let d_out = dy.len() / n.max(1);
            let wv = nodes[w.0].value.data();
            let xv = nodes[x.0].value.data();
            accumulate(nodes, adj, *x, |g| {
                gemm(n, d_out, d_in, dy, false, wv, true, g, true)
            });
            accumulate(nodes, adj, *w, |g| {
                gemm(d_in, n, d_out, xv, true, dy, false, g, true)
            });
            if let Some(b) = b {
                accumulate(nodes, adj, *b, |g| {
                    for row in dy.chunks_exact(d_out) {
                        for (gb, d) in g.iter_mut().zip(row) {
                            *gb += d;
                        }
                    }
                });
            }
        }
        Op::Relu { x } => {
            let out = node.value.data();
            accumulate(nodes, adj, *x, |g| {
                for ((gi, d), o) in g.iter_mut().zip(dy).zip(out) {
                    if *o > 0.0 {
                        *gi += d;
                    }
                }
            });
        }
        Op::BatchNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
            batch_stats,
        } => {
            let d = inv_std.len();
            let n = dy.len() / d;
            let gv = nodes[gamma.0].value.data();
            let mut sum_dy = vec![0.0; d];
            let mut sum_dy_xhat = vec![0.0; d];
            for (row_dy, row_xh) in dy.chunks_exact(d).zip(xhat.chunks_exact(d)) {
                for j in 0..d {
                    sum_dy[j] += row_dy[j];
                    sum_dy_xhat[j] += row_dy[j] * row_xh[j];
                }
            }
            accumulate(nodes, adj, *gamma, |g| {
                for (a, s) in g.iter_mut().zip(&sum_dy_xhat) {
                    *a += s;
                }
            });
            accumulate(nodes, adj, *beta, |g| {
                for (a, s) in g.iter_mut().zip(&sum_dy) {
                    *a += s;
                }
            });
            accumulate(nodes, adj, *x, |g| {
                let inv_n = 1.0 / n as f64;
                for ((grow, row_dy), row_xh) in g
                    .chunks_exact_mut(d)
                    .zip(dy.chunks_exact(d))
                    .zip(xhat.chunks_exact(d))
                {
                    for j in 0..d {
                        let scale = gv[j] * inv_std[j];
                        grow[j] += if *batch_stats {
                            scale
                                * (row_dy[j]
                                    - inv_n * sum_dy[j]
                                    - inv_n * row_xh[j] * sum_dy_xhat[j])
                        } else {
                            scale * row_dy[j]
                        };
                    }
                }
            });
        }
        Op::SegmentMean { x, offsets } => {
            let d = node.value.shape().last().copied().unwrap_or(1);
            accumulate(nodes, adj, *x, |g| {
                for (s, w) in offsets.windows(2).enumerate() {
                    let inv = 1.0 / (w[1] - w[0]) as f64;
                    let src = &dy[s * d..(s + 1) * d];
                    for r in w[0]..w[1] {
                        for (gi, v) in g[r * d..(r + 1) * d].iter_mut().zip(src) {
                            *gi += v * inv;
                        }
                    }
                }
            });
        }
        Op::SegmentMax { x, argmax } => {
            let d = nodes[x.0].value.shape().last().copied().unwrap_or(1);
            accumulate(nodes, adj, *x, |g| {
                for (k, (&row, v)) in argmax.iter().zip(dy).enumerate() {
                    g[row * d + k % d] += v;
                }
            });
        }
        Op::Propagate { x, adj: a } => {
            let width = dy.len() / a.rows().max(1);
            accumulate(nodes, adj, *x, |g| a.transpose_matmul_acc(dy, width, g));
        }
        Op::ConcatCols { parts } => {
            let total: usize = parts.iter().map(|p| p.1).sum();
            let rows = dy.len() / total.max(1);
            let mut col = 0;
            for &(p, w) in parts {
                accumulate(nodes, adj, p, |g| {
                    for r in 0..rows {
                        let src = &dy[r * total + col..r * total + col + w];
                        for (gi, v) in g[r * w..(r + 1) * w].iter_mut().zip(src) {
                            *gi += v;
                        }
                    }
                });
                col += w;
            }
        }
        Op::GatherRows { table, index } => {
            let d = node.value.shape().last().copied().unwrap_or(1);
            accumulate(nodes, adj, *table, |g| {
                for (r, &src) in index.iter().enumerate() {
                    for (gi, v) in g[src * d..(src + 1) * d]
                        .iter_mut()
                        .zip(&dy[r * d..(r + 1) * d])
                    {
                        *gi += v;
                    }
                }
            });
        }
        Op::Mse { a, b } => {
            let av = nodes[a.0].value.data();
            let bv = nodes[b.0].value.data();
            let scale = 2.0 * dy[0] / av.len() as f64;
            accumulate(nodes, adj, *a, |g| {
                for ((gi, x), y) in g.iter_mut().zip(av).zip(bv) {
                    *gi += scale * (x - y);
                }
            });
            accumulate(nodes, adj, *b, |g| {
                for ((gi, x), y) in g.iter_mut().zip(av).zip(bv) {
                    *gi -= scale * (x - y);
                }
            });
        }
        Op::Scale { x, factor } => {
            accumulate(nodes, adj, *x, |g| {
                for (gi, v) in g.iter_mut().zip(dy) {
                    *gi += factor * v;
                }
            });
        }
        Op::Add { a, b } => {
            for v in [*a, *b] {
                accumulate(nodes, adj, v, |g| {
                    for (gi, d) in g.iter_mut().zip(dy) {
                        *gi += d;
                    }
                });
            }
        }
        Op::Reshape { x } => {
            accumulate(nodes, adj, *x, |g| {
                for (gi, d) in g.iter_mut().zip(dy) {
                    *gi += d;
                }
            });
        }
        Op::Sum { x } => {
            accumulate(nodes, adj, *x, |g| g.iter_mut().for_each(|gi| *gi += dy[0]));
        }
    }
}

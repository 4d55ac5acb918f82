// SPDX-License-Identifier: Apache-2.0

//! Differentiable operations recorded on a [`Tape`].

use std::sync::Arc;

use super::sparse::SparseMatrix;
use super::tape::{Op, Tape, Var};
use super::tensor::{gemm, Tensor};
use super::TensorError;

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Running mean and variance of a batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    /// Unbiased variance estimate.
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> TensorError {
    TensorError::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

impl Tape {
    /// `x W + b` for `x: N x D_in`, `W: D_in x D_out`, `b: D_out`.
    pub fn linear(&self, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
        let value = {
            let xv = self.value(x);
            let wv = self.value(w);
            let (n, d_in) = xv.dims2()?;
            let (w_in, d_out) = wv.dims2()?;
            if d_in != w_in {
                return Err(shape_err("linear", xv.shape(), wv.shape()));
            }
            let mut out = vec![0.0; n * d_out];
            gemm(n, d_in, d_out, xv.data(), false, wv.data(), false, &mut out, false);
            if let Some(b) = b {
                let bv = self.value(b);
                if bv.shape() != [d_out] {
                    return Err(shape_err("linear bias", wv.shape(), bv.shape()));
                }
                for row in out.chunks_exact_mut(d_out) {
                    for (o, bi) in row.iter_mut().zip(bv.data()) {
                        *o += bi;
                    }
                }
            }
            Tensor::new(vec![n, d_out], out)?
        };
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.push_op("linear", value, Op::Linear { x, w, b }, &inputs)
    }

    /// Elementwise `max(0, x)`; the subgradient at zero is zero.
    pub fn relu(&self, x: Var) -> Result<Var, TensorError> {
        let value = {
            let xv = self.value(x);
            let data = xv.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
            Tensor::new(xv.shape().to_vec(), data)?
        };
        self.push_op("relu", value, Op::Relu { x }, &[x])
    }

    /// Batch normalization over the rows of `x: N x D`.
    ///
    /// Train mode normalizes with the biased batch variance and folds the
    /// batch statistics into `stats` (unbiased variance, momentum 0.1).
    /// Eval mode reads `stats` only.
    pub fn batch_norm(
        &self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: &mut RunningStats,
        mode: Mode,
    ) -> Result<Var, TensorError> {
        let (value, xhat, inv_std) = {
            let xv = self.value(x);
            let gv = self.value(gamma);
            let bv = self.value(beta);
            let (n, d) = xv.dims2()?;
            if gv.shape() != [d] || bv.shape() != [d] {
                return Err(shape_err("batch_norm", xv.shape(), gv.shape()));
            }
            if stats.mean.len() != d || stats.var.len() != d {
                return Err(shape_err("batch_norm running stats", &[d], &[stats.mean.len()]));
            }
            let (mean, var) = match mode {
                Mode::Train => {
                    if n < 2 {
                        return Err(TensorError::BatchTooSmall(n));
                    }
                    let mut mean = vec![0.0; d];
                    for row in xv.data().chunks_exact(d) {
                        for (m, v) in mean.iter_mut().zip(row) {
                            *m += v;
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= n as f64);
                    let mut var = vec![0.0; d];
                    for row in xv.data().chunks_exact(d) {
                        for j in 0..d {
                            let c = row[j] - mean[j];
                            var[j] += c * c;
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= n as f64);
                    let unbias = n as f64 / (n - 1) as f64;
                    for j in 0..d {
                        stats.mean[j] = (1.0 - BATCH_NORM_MOMENTUM) * stats.mean[j]
                            + BATCH_NORM_MOMENTUM * mean[j];
                        stats.var[j] = (1.0 - BATCH_NORM_MOMENTUM) * stats.var[j]
                            + BATCH_NORM_MOMENTUM * var[j] * unbias;
                    }
                    (mean, var)
                }
                Mode::Eval => (stats.mean.clone(), stats.var.clone()),
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BATCH_NORM_EPS).sqrt()).collect();
            let mut xhat = vec![0.0; n * d];
            let mut out = vec![0.0; n * d];
            for ((orow, hrow), row) in out
                .chunks_exact_mut(d)
                .zip(xhat.chunks_exact_mut(d))
                .zip(xv.data().chunks_exact(d))
            {
                for j in 0..d {
                    hrow[j] = (row[j] - mean[j]) * inv_std[j];
                    orow[j] = gv.data()[j] * hrow[j] + bv.data()[j];
                }
            }
            (Tensor::new(vec![n, d], out)?, xhat, inv_std)
        };
        self.push_op(
            "batch_norm",
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats: mode == Mode::Train,
            },
            &[x, gamma, beta],
        )
    }

    /// Column means of consecutive row segments `offsets[s]..offsets[s+1]`.
    /// Returns a `segments x D` matrix.
    pub fn segment_mean(&self, x: Var, offsets: Arc<[usize]>) -> Result<Var, TensorError> {
        let value = {
            let xv = self.value(x);
            let (n, d) = xv.dims2()?;
            check_offsets("segment_mean", &offsets, n)?;
            let segments = offsets.len() - 1;
            let mut out = vec![0.0; segments * d];
            for (s, w) in offsets.windows(2).enumerate() {
                let dst = &mut out[s * d..(s + 1) * d];
                for r in w[0]..w[1] {
                    for (o, v) in dst.iter_mut().zip(xv.row(r)) {
                        *o += v;
                    }
                }
                let inv = 1.0 / (w[1] - w[0]) as f64;
                dst.iter_mut().for_each(|o| *o *= inv);
            }
            Tensor::new(vec![segments, d], out)?
        };
        self.push_op("segment_mean", value, Op::SegmentMean { x, offsets }, &[x])
    }

    /// Column maxima of consecutive row segments. Ties resolve to the lowest row.
    pub fn segment_max(&self, x: Var, offsets: Arc<[usize]>) -> Result<Var, TensorError> {
        let (value, argmax) = {
            let xv = self.value(x);
            let (n, d) = xv.dims2()?;
            check_offsets("segment_max", &offsets, n)?;
            let segments = offsets.len() - 1;
            let mut out = vec![0.0; segments * d];
            let mut argmax = vec![0usize; segments * d];
            for (s, w) in offsets.windows(2).enumerate() {
                for j in 0..d {
                    let mut best = w[0];
                    for r in w[0] + 1..w[1] {
                        if xv.data()[r * d + j] > xv.data()[best * d + j] {
                            best = r;
                        }
                    }
                    out[s * d + j] = xv.data()[best * d + j];
                    argmax[s * d + j] = best;
                }
            }
            (Tensor::new(vec![segments, d], out)?, argmax)
        };
        self.push_op("segment_max", value, Op::SegmentMax { x, argmax }, &[x])
    }

    /// Column mean of a `T x D` matrix, returned as a length-`D` vector.
    pub fn mean_pool_rows(&self, x: Var) -> Result<Var, TensorError> {
        let t = self.rows_for_pool("mean_pool_rows", x)?;
        let pooled = self.segment_mean(x, Arc::from(vec![0, t]))?;
        self.flatten(pooled)
    }

    /// Column max of a `T x D` matrix, returned as a length-`D` vector.
    pub fn max_pool_rows(&self, x: Var) -> Result<Var, TensorError> {
        let t = self.rows_for_pool("max_pool_rows", x)?;
        let pooled = self.segment_max(x, Arc::from(vec![0, t]))?;
        self.flatten(pooled)
    }

    fn rows_for_pool(&self, op: &'static str, x: Var) -> Result<usize, TensorError> {
        let (t, _) = self.value(x).dims2()?;
        if t == 0 {
            return Err(TensorError::EmptySequence(op));
        }
        Ok(t)
    }

    /// `adj * x` with a fixed sparse operator.
    pub fn propagate(&self, adj: Arc<SparseMatrix>, x: Var) -> Result<Var, TensorError> {
        let value = {
            let xv = self.value(x);
            let (n, d) = xv.dims2()?;
            if adj.cols() != n {
                return Err(shape_err("propagate", &[adj.rows(), adj.cols()], xv.shape()));
            }
            Tensor::new(vec![adj.rows(), d], adj.matmul_dense(xv.data(), d))?
        };
        self.push_op("propagate", value, Op::Propagate { x, adj }, &[x])
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var, TensorError> {
        let (value, widths) = {
            let values: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
            let mut dims = Vec::with_capacity(values.len());
            for v in &values {
                dims.push(v.dims2()?);
            }
            let rows = dims.first().map_or(0, |d| d.0);
            if let Some(bad) = dims.iter().position(|d| d.0 != rows) {
                return Err(shape_err("concat_cols", values[0].shape(), values[bad].shape()));
            }
            let total: usize = dims.iter().map(|d| d.1).sum();
            let mut out = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for v in &values {
                    out.extend_from_slice(v.row(r));
                }
            }
            (
                Tensor::new(vec![rows, total], out)?,
                dims.iter().map(|d| d.1).collect::<Vec<_>>(),
            )
        };
        let parts_w = parts.iter().copied().zip(widths).collect();
        self.push_op("concat_cols", value, Op::ConcatCols { parts: parts_w }, parts)
    }

    /// Row lookup `table[index[i]]`; equivalent to a one-hot matrix product.
    pub fn gather_rows(&self, table: Var, index: Arc<[usize]>) -> Result<Var, TensorError> {
        let value = {
            let tv = self.value(table);
            let (rows, d) = tv.dims2()?;
            let mut out = Vec::with_capacity(index.len() * d);
            for &i in index.iter() {
                if i >= rows {
                    return Err(TensorError::IndexOutOfRange { index: i, len: rows });
                }
                out.extend_from_slice(tv.row(i));
            }
            Tensor::new(vec![index.len(), d], out)?
        };
        self.push_op("gather_rows", value, Op::GatherRows { table, index }, &[table])
    }

    /// Mean of `(a - b)^2` over all elements.
    pub fn mse(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = {
            let av = self.value(a);
            let bv = self.value(b);
            if av.shape() != bv.shape() {
                return Err(shape_err("mse", av.shape(), bv.shape()));
            }
            if av.numel() == 0 {
                return Err(TensorError::EmptySequence("mse"));
            }
            let s: f64 = av
                .data()
                .iter()
                .zip(bv.data())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            Tensor::scalar(s / av.numel() as f64)
        };
        self.push_op("mse", value, Op::Mse { a, b }, &[a, b])
    }

    pub fn scale(&self, x: Var, factor: f64) -> Result<Var, TensorError> {
        let value = {
            let xv = self.value(x);
            let data = xv.data().iter().map(|v| v * factor).collect();
            Tensor::new(xv.shape().to_vec(), data)?
        };
        self.push_op("scale", value, Op::Scale { x, factor }, &[x])
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = {
            let av = self.value(a);
            let bv = self.value(b);
            if av.shape() != bv.shape() {
                return Err(shape_err("add", av.shape(), bv.shape()));
            }
            let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
            Tensor::new(av.shape().to_vec(), data)?
        };
        self.push_op("add", value, Op::Add { a, b }, &[a, b])
    }

    pub fn reshape(&self, x: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        let value = self.to_tensor(x).reshape(shape)?;
        self.push_op("reshape", value, Op::Reshape { x }, &[x])
    }

    /// Drops to rank 1.
    pub fn flatten(&self, x: Var) -> Result<Var, TensorError> {
        let n = self.value(x).numel();
        self.reshape(x, vec![n])
    }

    pub fn sum(&self, x: Var) -> Result<Var, TensorError> {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        self.push_op("sum", value, Op::Sum { x }, &[x])
    }
}

fn check_offsets(op: &'static str, offsets: &[usize], rows: usize) -> Result<(), TensorError> {
    if offsets.len() < 2 || offsets[0] != 0 || *offsets.last().unwrap() != rows {
        return Err(TensorError::Segments { op, rows });
    }
    if offsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TensorError::EmptySequence(op));
    }
    Ok(())
}

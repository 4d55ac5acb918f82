// SPDX-License-Identifier: Apache-2.0

//! Minimal reverse-mode differentiation over dense `f64` tensors.
//!
//! Every model in the crate is expressed with the operations on [`Tape`]:
//! linear layers, ReLU, batch norm, sparse propagation, segment pooling,
//! row gathers and MSE. [`grad_check`] compares the recorded gradients
//! against central finite differences.

mod gradcheck;
mod ops;
mod params;
mod sparse;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{grad_check, grad_check_params};
pub use ops::{Mode, RunningStats, BATCH_NORM_EPS, BATCH_NORM_MOMENTUM};
pub use params::{Bound, Param, ParamSet};
pub use sparse::SparseMatrix;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: got shape {shape:?}")]
    Rank { op: &'static str, shape: Vec<usize> },
    #[error("data length {len} does not fit shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("batch norm in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("{0}: empty sequence")]
    EmptySequence(&'static str),
    #[error("{op}: segment offsets do not cover {rows} rows")]
    Segments { op: &'static str, rows: usize },
    #[error("row index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
}

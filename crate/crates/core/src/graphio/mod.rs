// SPDX-License-Identifier: Apache-2.0

//! Records and on-disk formats: LUT graphs, AST graphs, embeddings, labels
//! and dataset splits, plus graph batching and label standardization.

mod ast;
mod batch;
mod corpus;
mod embed;
mod labels;
mod lut;
mod normalize;
mod split;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{load_ast_graphs, read_ast_graphs, save_ast_graphs, write_ast_graphs, AstGraph, AstNode, Category};
pub use batch::{batch_graphs, BatchedGraph};
pub use corpus::{Corpus, AST_FILE, EMBED_FILE, LABEL_FILE, LUT_FILE, SPLIT_FILE};
pub use embed::{
    load_embeddings, read_embeddings, save_embeddings, write_embeddings, EmbeddingRecord,
    EMBED_MAGIC, EMBED_VERSION,
};
pub use labels::{load_labels, read_labels, save_labels, write_labels, LabelRecord};
pub use lut::{load_lut_graphs, read_lut_graphs, save_lut_graphs, write_lut_graphs, LutGraph, LUT_ATTR_DIM};
pub use normalize::LabelNormalizer;
pub use split::{load_split, make_split, make_split_percent, save_split, DatasetSplit, MIN_SPLIT_IDS};

/// Which post-synthesis metric a model regresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Area,
    Delay,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Area => "area",
            Target::Delay => "delay",
        })
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "area" => Ok(Target::Area),
            "delay" => Ok(Target::Delay),
            other => Err(format!("unknown target {other:?} (expected area or delay)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },
    #[error("bad magic {found:?}, expected {expected:?}")]
    Magic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("truncated payload: {0}")]
    Truncated(String),
    #[error("{0} trailing bytes after last record")]
    TrailingBytes(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("duplicate design id {0:?}")]
    DuplicateKey(String),
    #[error("design {id:?}: {message}")]
    Domain { id: String, message: String },
    #[error("need at least {min} design ids to split, got {got}")]
    TooFewIds { min: usize, got: usize },
    #[error("labels have zero variance")]
    ZeroVariance,
    #[error("{0}")]
    Invalid(String),
}

impl DataError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}

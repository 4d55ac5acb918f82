// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::Path;

use super::{
    load_ast_graphs, load_embeddings, load_labels, load_lut_graphs, load_split, AstGraph, DataError,
    DatasetSplit, EmbeddingRecord, LabelRecord, LutGraph,
};

pub const LUT_FILE: &str = "lut_graphs.jsonl";
pub const AST_FILE: &str = "ast_graphs.jsonl";
pub const EMBED_FILE: &str = "embeddings.qdem";
pub const LABEL_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.json";

/// A data directory: labels and split are required, each modality is
/// optional and empty when its file is absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub labels: BTreeMap<String, LabelRecord>,
    pub split: DatasetSplit,
    pub lut: BTreeMap<String, LutGraph>,
    pub ast: BTreeMap<String, AstGraph>,
    pub embeddings: BTreeMap<String, EmbeddingRecord>,
}

fn keyed<T>(items: Vec<T>, key: impl Fn(&T) -> &str) -> Result<BTreeMap<String, T>, DataError> {
    let mut out = BTreeMap::new();
    for item in items {
        let k = key(&item).to_string();
        if out.insert(k.clone(), item).is_some() {
            return Err(DataError::DuplicateKey(k));
        }
    }
    Ok(out)
}

impl Corpus {
    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let labels = load_labels(&dir.join(LABEL_FILE))?;
        let split = load_split(&dir.join(SPLIT_FILE))?;
        let lut_path = dir.join(LUT_FILE);
        let lut = if lut_path.exists() {
            keyed(load_lut_graphs(&lut_path)?, |g| &g.design_id)?
        } else {
            BTreeMap::new()
        };
        let ast_path = dir.join(AST_FILE);
        let ast = if ast_path.exists() {
            keyed(load_ast_graphs(&ast_path)?, |g| &g.design_id)?
        } else {
            BTreeMap::new()
        };
        let emb_path = dir.join(EMBED_FILE);
        let embeddings = if emb_path.exists() {
            load_embeddings(&emb_path)?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            labels,
            split,
            lut,
            ast,
            embeddings,
        })
    }

    /// Ids of a split part by name (`train`, `val`, `test`).
    pub fn ids(&self, part: &str) -> Result<&[String], DataError> {
        self.split
            .part(part)
            .ok_or_else(|| DataError::Invalid(format!("unknown split part {part:?}")))
    }
}

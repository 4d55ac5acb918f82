// SPDX-License-Identifier: Apache-2.0

//! Regression metrics in log-label space, per-design error tables and
//! hidden-representation export.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphio::{Corpus, DataError, EmbeddingRecord, Target};
use crate::models::{
    embedding_batch, Checkpoint, GraphBatch, ModelError, ModelInput, ModelKind, PreparedGraph,
};

/// Denominator used for MAPE terms whose ground truth is (nearly) zero.
pub const MAPE_GUARD: f64 = 1e-12;
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("metrics need equal, nonempty inputs (got {0} and {1})")]
    Length(usize, usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("ground truth is constant; relative squared error is undefined")]
    DegenerateTarget,
    #[error("{count} design(s) lack {what}: {}", .ids.join(", "))]
    Missing { what: &'static str, count: usize, ids: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub target: Target,
    pub mae: f64,
    pub r2: f64,
    pub mape: f64,
    pub rse: f64,
    pub n: usize,
    /// Always `"log"`: values are natural-log labels.
    pub space: String,
    /// Number of MAPE terms that used [`MAPE_GUARD`] as denominator.
    pub mape_guarded: usize,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// MAE, RSE = SS_res / SS_tot, R2 = 1 - RSE and MAPE of `yhat` against `y`.
pub fn metrics(y: &[f64], yhat: &[f64], target: Target) -> Result<MetricReport, EvalError> {
    if y.is_empty() || y.len() != yhat.len() {
        return Err(EvalError::Length(y.len(), yhat.len()));
    }
    if let Some(i) = y.iter().chain(yhat).position(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(i % y.len()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::DegenerateTarget);
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    let mae = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let mut mape_guarded = 0;
    let mape = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| {
            let denom = if a.abs() < MAPE_GUARD {
                mape_guarded += 1;
                MAPE_GUARD
            } else {
                a.abs()
            };
            (a - b).abs() / denom
        })
        .sum::<f64>()
        / n;
    let rse = ss_res / ss_tot;
    Ok(MetricReport {
        target,
        mae,
        r2: 1.0 - rse,
        mape,
        rse,
        n: y.len(),
        space: "log".into(),
        mape_guarded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerDesignRow {
    pub design_id: String,
    pub gt: f64,
    pub pred: f64,
    pub ae: f64,
}

/// Absolute log-space errors, sorted by design id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerDesignReport {
    pub rows: Vec<PerDesignRow>,
}

impl PerDesignReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| DataError::Invalid(e.to_string());
        wtr.write_record(["design_id", "gt", "pred", "ae"]).map_err(err)?;
        for r in &self.rows {
            wtr.write_record([
                r.design_id.clone(),
                format!("{:?}", r.gt),
                format!("{:?}", r.pred),
                format!("{:?}", r.ae),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| DataError::Invalid(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, DataError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize().enumerate() {
            let row: PerDesignRow = rec.map_err(|e| DataError::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

fn missing<T>(map: &std::collections::BTreeMap<String, T>, ids: &[String], what: &'static str) -> Result<(), EvalError> {
    let ids: Vec<String> = ids.iter().filter(|id| !map.contains_key(*id)).cloned().collect();
    if ids.is_empty() {
        Ok(())
    } else {
        Err(EvalError::Missing {
            what,
            count: ids.len(),
            ids,
        })
    }
}

/// Model inputs for `ids` in the modality the checkpoint was trained on.
pub fn inputs_for(ck: &Checkpoint, corpus: &Corpus, ids: &[String]) -> Result<Vec<ModelInput>, EvalError> {
    let mut out = Vec::new();
    match ck.meta.model.kind {
        ModelKind::Teacher => {
            missing(&corpus.lut, ids, "a LUT graph")?;
            for part in ids.chunks(EVAL_CHUNK) {
                let g: Vec<PreparedGraph> = part.iter().map(|id| PreparedGraph::from_lut(&corpus.lut[id])).collect();
                out.push(ModelInput::Graphs(GraphBatch::assemble(&g.iter().collect::<Vec<_>>())));
            }
        }
        ModelKind::AstGnn => {
            missing(&corpus.ast, ids, "an AST graph")?;
            for part in ids.chunks(EVAL_CHUNK) {
                let g: Vec<PreparedGraph> = part.iter().map(|id| PreparedGraph::from_ast(&corpus.ast[id])).collect();
                out.push(ModelInput::Graphs(GraphBatch::assemble(&g.iter().collect::<Vec<_>>())));
            }
        }
        ModelKind::Student => {
            missing(&corpus.embeddings, ids, "an embedding")?;
            for part in ids.chunks(EVAL_CHUNK) {
                let recs: Vec<&EmbeddingRecord> = part.iter().map(|id| &corpus.embeddings[id]).collect();
                out.push(ModelInput::Embeddings(embedding_batch(&recs, ck.meta.model.in_dim)?));
            }
        }
    }
    Ok(out)
}

fn sorted(ids: &[String]) -> Vec<String> {
    let mut ids = ids.to_vec();
    ids.sort();
    ids.dedup();
    ids
}

/// Eval-mode log-space predictions for `ids`, sorted by id.
pub fn predict_log(ck: &Checkpoint, corpus: &Corpus, ids: &[String]) -> Result<Vec<(String, f64)>, EvalError> {
    let ids = sorted(ids);
    let mut preds = Vec::with_capacity(ids.len());
    for input in inputs_for(ck, corpus, &ids)? {
        let out = ck.model.predict(&input)?;
        preds.extend(out.pred.into_iter().map(|z| ck.meta.normalizer.invert(z)));
    }
    Ok(ids.into_iter().zip(preds).collect())
}

/// Metrics and per-design errors of a checkpoint on one split part.
pub fn evaluate(ck: &Checkpoint, corpus: &Corpus, part: &str) -> Result<(MetricReport, PerDesignReport), EvalError> {
    let ids = corpus.ids(part)?.to_vec();
    missing(&corpus.labels, &ids, "a label")?;
    let preds = predict_log(ck, corpus, &ids)?;
    let target = ck.meta.target;
    let rows: Vec<PerDesignRow> = preds
        .into_iter()
        .map(|(id, pred)| {
            let gt = corpus.labels[&id].log_value(target);
            PerDesignRow {
                ae: (gt - pred).abs(),
                design_id: id,
                gt,
                pred,
            }
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.gt).collect();
    let yhat: Vec<f64> = rows.iter().map(|r| r.pred).collect();
    Ok((metrics(&y, &yhat, target)?, PerDesignReport { rows }))
}

/// Last hidden vectors of `ids` as pooled embedding records, sorted by id.
pub fn export_hidden(ck: &Checkpoint, corpus: &Corpus, ids: &[String]) -> Result<Vec<EmbeddingRecord>, EvalError> {
    let ids = sorted(ids);
    let mut out = Vec::with_capacity(ids.len());
    let mut it = ids.iter();
    for input in inputs_for(ck, corpus, &ids)? {
        let z = ck.model.extract_last_hidden(&input)?;
        let d = z.shape()[1];
        for row in z.data().chunks_exact(d) {
            let id = it.next().expect("one row per id");
            out.push(EmbeddingRecord::pooled(id, row.iter().map(|&v| v as f32).collect())?);
        }
    }
    Ok(out)
}

pub fn save_report(path: &Path, report: &MetricReport) -> Result<(), DataError> {
    std::fs::write(path, report.to_json()).map_err(|e| DataError::io(path, e))
}

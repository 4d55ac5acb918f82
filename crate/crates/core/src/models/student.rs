// SPDX-License-Identifier: Apache-2.0

use crate::diffcore::Tensor;
use crate::graphio::EmbeddingRecord;

use super::ModelError;

/// Column means of the token rows, or the single row of a pooled record.
///
/// Each column is summed in ascending value order, so the result does not
/// depend on the order of the rows at all.
pub fn pool_embedding(e: &EmbeddingRecord) -> Vec<f64> {
    if e.pooled || e.rows == 1 {
        return e.row(0).iter().map(|&v| v as f64).collect();
    }
    let mut col = vec![0.0f64; e.rows];
    (0..e.dim)
        .map(|j| {
            for (r, slot) in col.iter_mut().enumerate() {
                *slot = e.data[r * e.dim + j] as f64;
            }
            col.sort_unstable_by(f64::total_cmp);
            col.iter().sum::<f64>() / e.rows as f64
        })
        .collect()
}

/// `B x dim` matrix of pooled embeddings, one row per record.
pub fn embedding_batch(records: &[&EmbeddingRecord], dim: usize) -> Result<Tensor, ModelError> {
    if records.is_empty() {
        return Err(ModelError::Input("empty embedding batch".into()));
    }
    let mut data = Vec::with_capacity(records.len() * dim);
    for r in records {
        if r.dim != dim {
            return Err(ModelError::Input(format!(
                "embedding {:?} has dim {}, model expects {dim}",
                r.design_id, r.dim
            )));
        }
        if r.data.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Input(format!("embedding {:?} is not finite", r.design_id)));
        }
        data.extend(pool_embedding(r));
    }
    Ok(Tensor::new(vec![records.len(), dim], data)?)
}

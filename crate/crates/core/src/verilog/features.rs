// SPDX-License-Identifier: Apache-2.0

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;

use super::syntax::VerilogModule;
use crate::diffcore::{Bound, ParamSet, Tape, Tensor, TensorError, Var};
use crate::graphio::{AstGraph, AstNode, Category, DataError};

pub const FEATURE_DIM: usize = 108;
pub const NUM_CATEGORIES: usize = 5;
pub const NUM_OP_CODES: usize = 100;
/// Bit counts above this share the last one-hot class.
pub const BIT_CAP: u32 = 200;
pub const BIT_CLASSES: usize = BIT_CAP as usize + 1;
pub const PROJ_DIM: usize = 4;
pub const NODE_FEATURE_DIM: usize = 4 * PROJ_DIM;

/// Design-level features, laid out as
/// `[in_bits, out_bits, longest_path, category counts (5), op counts (100)]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVector108 {
    pub total_in_bits: u64,
    pub total_out_bits: u64,
    pub longest_path: u64,
    pub node_type_freq: [u64; NUM_CATEGORIES],
    pub op_type_freq: [u64; NUM_OP_CODES],
}

impl FeatureVector108 {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        out[0] = self.total_in_bits as f64;
        out[1] = self.total_out_bits as f64;
        out[2] = self.longest_path as f64;
        for (o, v) in out[3..8].iter_mut().zip(&self.node_type_freq) {
            *o = *v as f64;
        }
        for (o, v) in out[8..].iter_mut().zip(&self.op_type_freq) {
            *o = *v as f64;
        }
        out
    }

    pub fn from_array(a: &[f64; FEATURE_DIM]) -> Result<Self, DataError> {
        let count = |i: usize| {
            let v = a[i];
            if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(DataError::Invalid(format!("feature f{i} = {v} is not a count")))
            }
        };
        let mut node_type_freq = [0; NUM_CATEGORIES];
        for (k, o) in node_type_freq.iter_mut().enumerate() {
            *o = count(3 + k)?;
        }
        let mut op_type_freq = [0; NUM_OP_CODES];
        for (k, o) in op_type_freq.iter_mut().enumerate() {
            *o = count(8 + k)?;
        }
        Ok(Self {
            total_in_bits: count(0)?,
            total_out_bits: count(1)?,
            longest_path: count(2)?,
            node_type_freq,
            op_type_freq,
        })
    }
}

/// Maximum number of syntactic edges on a path from the root. Dataflow links
/// are not followed.
pub fn longest_path(g: &AstGraph) -> u64 {
    let n = g.nodes.len();
    let children = g.children();
    // Reverse topological order via iterative DFS post-order.
    let mut order = Vec::with_capacity(n);
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some((v, i)) = stack.pop() {
            if i < children[v].len() {
                stack.push((v, i + 1));
                let c = children[v][i];
                if state[c] == 0 {
                    state[c] = 1;
                    stack.push((c, 0));
                }
            } else {
                state[v] = 2;
                order.push(v);
            }
        }
    }
    let mut depth = vec![0u64; n];
    for &v in &order {
        depth[v] = children[v].iter().map(|&c| depth[c] + 1).max().unwrap_or(0);
    }
    g.root().map_or(0, |r| depth[r])
}

pub fn extract_features_108(g: &AstGraph, m: &VerilogModule) -> FeatureVector108 {
    let mut node_type_freq = [0u64; NUM_CATEGORIES];
    let mut op_type_freq = [0u64; NUM_OP_CODES];
    for node in &g.nodes {
        node_type_freq[node.category.code()] += 1;
        if node.category == Category::Operation {
            op_type_freq[node.op_type as usize] += 1;
        }
    }
    FeatureVector108 {
        total_in_bits: m.input_bits(),
        total_out_bits: m.output_bits(),
        longest_path: longest_path(g),
        node_type_freq,
        op_type_freq,
    }
}

pub fn bit_class(bits: u32) -> usize {
    bits.min(BIT_CAP) as usize
}

/// One-hot class of each of the four node attributes, in encoder order
/// (in_bits, out_bits, category, op).
pub fn node_classes(n: &AstNode) -> [usize; 4] {
    [
        bit_class(n.in_bits),
        bit_class(n.out_bits),
        n.category.code(),
        n.op_type as usize,
    ]
}

pub const ENCODER_TABLES: [(&str, usize); 4] = [
    ("encoder.in_bits", BIT_CLASSES),
    ("encoder.out_bits", BIT_CLASSES),
    ("encoder.category", NUM_CATEGORIES),
    ("encoder.op", NUM_OP_CODES),
];

/// Adds the four projection matrices, initialized like bias-free linear layers
/// over one-hot inputs.
pub fn init_node_encoder<R: Rng + ?Sized>(params: &mut ParamSet, rng: &mut R) {
    for (name, classes) in ENCODER_TABLES {
        let bound = 1.0 / (classes as f64).sqrt();
        params.insert(name, Tensor::uniform(&[classes, PROJ_DIM], bound, rng));
    }
}

/// Plain evaluation of the 16-dim feature of one node.
pub fn node_feature_encoder(n: &AstNode, proj: &ParamSet) -> Result<[f64; NODE_FEATURE_DIM], TensorError> {
    let mut out = [0.0; NODE_FEATURE_DIM];
    for (k, ((name, _), class)) in ENCODER_TABLES.iter().zip(node_classes(n)).enumerate() {
        let table = proj
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        if table.shape().get(1) != Some(&PROJ_DIM) || class >= table.shape()[0] {
            return Err(TensorError::Shape {
                op: "node_feature_encoder",
                lhs: table.shape().to_vec(),
                rhs: vec![class + 1, PROJ_DIM],
            });
        }
        out[k * PROJ_DIM..(k + 1) * PROJ_DIM].copy_from_slice(table.row(class));
    }
    Ok(out)
}

/// Differentiable encoding of many nodes: `N x 16`.
pub fn encode_nodes(tape: &Tape, params: &Bound, nodes: &[AstNode]) -> Result<Var, TensorError> {
    let classes: Vec<[usize; 4]> = nodes.iter().map(node_classes).collect();
    let mut parts = Vec::with_capacity(4);
    for (k, (name, _)) in ENCODER_TABLES.iter().enumerate() {
        let table = params
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        let index: Arc<[usize]> = classes.iter().map(|c| c[k]).collect();
        parts.push(tape.gather_rows(table, index)?);
    }
    tape.concat_cols(&parts)
}

pub fn write_features_csv<W: Write>(w: W, rows: &[(String, FeatureVector108)]) -> Result<(), DataError> {
    let err = |e: csv::Error| DataError::Invalid(e.to_string());
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["design_id".to_string()];
    header.extend((0..FEATURE_DIM).map(|i| format!("f{i}")));
    wtr.write_record(&header).map_err(err)?;
    for (id, fv) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(fv.to_array().iter().map(|v| v.to_string()));
        wtr.write_record(&rec).map_err(err)?;
    }
    wtr.flush().map_err(|e| DataError::Invalid(e.to_string()))
}

pub fn read_features_csv<R: Read>(r: R) -> Result<Vec<(String, FeatureVector108)>, DataError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != FEATURE_DIM + 1 || &headers[0] != "design_id" {
        return Err(DataError::Schema {
            line: 1,
            message: format!("expected design_id plus {FEATURE_DIM} feature columns"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| DataError::Parse {
            line,
            message: e.to_string(),
        })?;
        let mut a = [0.0; FEATURE_DIM];
        for (k, slot) in a.iter_mut().enumerate() {
            *slot = rec[k + 1].parse().map_err(|e| DataError::Parse {
                line,
                message: format!("f{k}: {e}"),
            })?;
        }
        out.push((rec[0].to_string(), FeatureVector108::from_array(&a)?));
    }
    Ok(out)
}

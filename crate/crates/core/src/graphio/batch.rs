// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use super::lut::{LutGraph, LUT_ATTR_DIM};
use crate::diffcore::Tensor;

/// Disjoint union of LUT graphs. Node rows of graph `g` occupy
/// `offsets[g]..offsets[g+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchedGraph {
    pub design_ids: Vec<String>,
    pub node_attrs: Tensor,
    /// Global node indices, already offset per graph.
    pub edges: Vec<(usize, usize)>,
    pub offsets: Arc<[usize]>,
}

impl BatchedGraph {
    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        *self.offsets.last().expect("offsets start with 0")
    }

    pub fn node_range(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }
}

/// Panics on an empty list; callers batch at least one graph.
pub fn batch_graphs(graphs: &[&LutGraph]) -> BatchedGraph {
    assert!(!graphs.is_empty(), "batch_graphs needs at least one graph");
    let total: usize = graphs.iter().map(|g| g.num_nodes).sum();
    let mut data = Vec::with_capacity(total * LUT_ATTR_DIM);
    let mut edges = Vec::with_capacity(graphs.iter().map(|g| g.edges.len()).sum());
    let mut offsets = Vec::with_capacity(graphs.len() + 1);
    offsets.push(0);
    let mut base = 0;
    for g in graphs {
        data.extend_from_slice(g.node_attrs.data());
        edges.extend(g.edges.iter().map(|&(s, d)| (s + base, d + base)));
        base += g.num_nodes;
        offsets.push(base);
    }
    BatchedGraph {
        design_ids: graphs.iter().map(|g| g.design_id.clone()).collect(),
        node_attrs: Tensor::new(vec![total, LUT_ATTR_DIM], data).expect("attr rows are 16 wide"),
        edges,
        offsets: offsets.into(),
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::diffcore::{SparseMatrix, Tape, Tensor, TensorError, Var};
use crate::graphio::{AstGraph, AstNode, BatchedGraph, LutGraph, LUT_ATTR_DIM};

/// `D^-1/2 (B + I) D^-1/2`, where `B` is the 0/1 symmetrization of the edge
/// list (parallel and reversed duplicates collapse) and `D` its row sums.
pub fn gcn_normalize(num_nodes: usize, edges: &[(usize, usize)]) -> SparseMatrix {
    let mut pairs = BTreeSet::new();
    for &(s, d) in edges {
        if s != d {
            pairs.insert((s, d));
            pairs.insert((d, s));
        }
    }
    for i in 0..num_nodes {
        pairs.insert((i, i));
    }
    let mut deg = vec![0.0f64; num_nodes];
    for &(r, _) in &pairs {
        deg[r] += 1.0;
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let triplets: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|(r, c)| (r, c, inv_sqrt[r] * inv_sqrt[c]))
        .collect();
    SparseMatrix::from_triplets(num_nodes, num_nodes, &triplets)
}

/// `Â x W`, with `Â` from [`gcn_normalize`].
pub fn graph_conv(tape: &Tape, x: Var, adj: &Arc<SparseMatrix>, w: Var) -> Result<Var, TensorError> {
    let h = tape.propagate(Arc::clone(adj), x)?;
    tape.linear(h, w, None)
}

/// Per-node inputs of a graph model.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeInputs {
    /// LUT truth tables, `N x 16`.
    Dense(Tensor),
    /// AST nodes, featurized inside the model.
    Ast(Vec<AstNode>),
}

impl NodeInputs {
    pub fn len(&self) -> usize {
        match self {
            NodeInputs::Dense(t) => t.shape().first().copied().unwrap_or(0),
            NodeInputs::Ast(n) => n.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One graph with its normalized adjacency computed once.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedGraph {
    pub design_id: String,
    pub inputs: NodeInputs,
    pub adj: SparseMatrix,
}

impl PreparedGraph {
    pub fn from_lut(g: &LutGraph) -> Self {
        Self {
            design_id: g.design_id.clone(),
            inputs: NodeInputs::Dense(g.node_attrs.clone()),
            adj: gcn_normalize(g.num_nodes, &g.edges),
        }
    }

    /// Syntactic and dataflow links both become (symmetrized) graph edges.
    pub fn from_ast(g: &AstGraph) -> Self {
        let edges: Vec<(usize, usize)> = g.edges.iter().chain(&g.flow).copied().collect();
        Self {
            design_id: g.design_id.clone(),
            inputs: NodeInputs::Ast(g.nodes.clone()),
            adj: gcn_normalize(g.nodes.len(), &edges),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.inputs.len()
    }
}

/// Disjoint union of prepared graphs, ready for a forward pass.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub inputs: NodeInputs,
    pub adj: Arc<SparseMatrix>,
    pub offsets: Arc<[usize]>,
}

impl GraphBatch {
    /// Panics when `graphs` is empty or mixes input kinds.
    pub fn assemble(graphs: &[&PreparedGraph]) -> Self {
        assert!(!graphs.is_empty(), "a batch needs at least one graph");
        let mut offsets = vec![0];
        for g in graphs {
            offsets.push(offsets.last().unwrap() + g.num_nodes());
        }
        let inputs = match &graphs[0].inputs {
            NodeInputs::Dense(first) => {
                let width = first.shape()[1];
                let mut data = Vec::new();
                for g in graphs {
                    match &g.inputs {
                        NodeInputs::Dense(t) => data.extend_from_slice(t.data()),
                        NodeInputs::Ast(_) => panic!("mixed node input kinds in one batch"),
                    }
                }
                NodeInputs::Dense(
                    Tensor::new(vec![*offsets.last().unwrap(), width], data)
                        .expect("rows share one width"),
                )
            }
            NodeInputs::Ast(_) => {
                let mut nodes = Vec::new();
                for g in graphs {
                    match &g.inputs {
                        NodeInputs::Ast(n) => nodes.extend_from_slice(n),
                        NodeInputs::Dense(_) => panic!("mixed node input kinds in one batch"),
                    }
                }
                NodeInputs::Ast(nodes)
            }
        };
        Self {
            inputs,
            adj: Arc::new(SparseMatrix::block_diagonal(graphs.iter().map(|g| &g.adj))),
            offsets: offsets.into(),
        }
    }

    pub fn from_batched(b: &BatchedGraph) -> Self {
        Self {
            inputs: NodeInputs::Dense(b.node_attrs.clone()),
            adj: Arc::new(gcn_normalize(b.num_nodes(), &b.edges)),
            offsets: Arc::clone(&b.offsets),
        }
    }

    pub fn single(g: &LutGraph) -> Self {
        Self::assemble(&[&PreparedGraph::from_lut(g)])
    }

    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn check_lut_width(&self) -> Result<(), TensorError> {
        match &self.inputs {
            NodeInputs::Dense(t) if t.shape()[1] == LUT_ATTR_DIM => Ok(()),
            NodeInputs::Dense(t) => Err(TensorError::Shape {
                op: "teacher input attributes",
                lhs: t.shape().to_vec(),
                rhs: vec![t.shape()[0], LUT_ATTR_DIM],
            }),
            NodeInputs::Ast(_) => Err(TensorError::Rank {
                op: "teacher expects dense LUT attributes",
                shape: vec![],
            }),
        }
    }
}

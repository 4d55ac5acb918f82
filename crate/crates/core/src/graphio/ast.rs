// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Semantic category of an AST node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Root = 0,
    Variable = 1,
    Operation = 2,
    Constant = 3,
    Edge = 4,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Root,
        Category::Variable,
        Category::Operation,
        Category::Constant,
        Category::Edge,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }
}

/// Op codes live in `[0, 100)`; 0 marks a node that is not an operation.
pub const OP_CODE_COUNT: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AstNode {
    pub category: Category,
    pub op_type: u8,
    /// Uncapped; the featurizer clamps.
    pub in_bits: u32,
    pub out_bits: u32,
}

impl AstNode {
    pub fn new(category: Category, op_type: u8, in_bits: u32, out_bits: u32) -> Self {
        Self {
            category,
            op_type,
            in_bits,
            out_bits,
        }
    }
}

/// Verilog syntax graph.
///
/// `edges` are syntactic parent-to-child links and form a DAG rooted at the
/// single root node (variables are shared by every expression that reads them).
/// `flow` holds dataflow links from connection nodes to the variables they drive.
#[derive(Clone, Debug, PartialEq)]
pub struct AstGraph {
    pub design_id: String,
    pub nodes: Vec<AstNode>,
    pub edges: Vec<(usize, usize)>,
    pub flow: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct NodeLine {
    cat: usize,
    op: usize,
    #[serde(rename = "in")]
    in_bits: u32,
    out: u32,
}

#[derive(Serialize, Deserialize)]
struct AstLine {
    id: String,
    n: usize,
    nodes: Vec<NodeLine>,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    flow: Vec<[usize; 2]>,
}

impl AstGraph {
    pub fn count(&self, cat: Category) -> usize {
        self.nodes.iter().filter(|n| n.category == cat).count()
    }

    /// Index of the unique root.
    pub fn root(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.category == Category::Root)
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            out[p].push(c);
        }
        out
    }

    pub fn validate(&self, line: usize) -> Result<(), DataError> {
        let schema = |message: String| DataError::Schema { line, message };
        let n = self.nodes.len();
        let roots: Vec<usize> = (0..n)
            .filter(|&i| self.nodes[i].category == Category::Root)
            .collect();
        if roots.len() != 1 {
            return Err(schema(format!("expected one root node, found {}", roots.len())));
        }
        for node in &self.nodes {
            if node.op_type as usize >= OP_CODE_COUNT {
                return Err(schema(format!("op code {} out of range", node.op_type)));
            }
            if node.op_type != 0 && node.category != Category::Operation {
                return Err(schema(format!(
                    "op code {} on a {:?} node",
                    node.op_type, node.category
                )));
            }
        }
        for &(a, b) in self.edges.iter().chain(&self.flow) {
            if a >= n || b >= n {
                return Err(schema(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
        }
        if self.edges.iter().any(|&(_, c)| c == roots[0]) {
            return Err(schema("root has a parent".into()));
        }
        // Kahn's algorithm over syntactic edges.
        let mut indeg = vec![0usize; n];
        for &(_, c) in &self.edges {
            indeg[c] += 1;
        }
        let children = self.children();
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        if seen != n {
            return Err(schema("syntactic edges contain a cycle".into()));
        }
        Ok(())
    }

    fn from_line(line_no: usize, text: &str) -> Result<Self, DataError> {
        let raw: AstLine = serde_json::from_str(text).map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.nodes.len() != raw.n {
            return Err(DataError::Schema {
                line: line_no,
                message: format!("n = {} but {} nodes", raw.n, raw.nodes.len()),
            });
        }
        let mut nodes = Vec::with_capacity(raw.n);
        for nl in raw.nodes {
            let category = Category::from_code(nl.cat).ok_or_else(|| DataError::Schema {
                line: line_no,
                message: format!("category {} out of range", nl.cat),
            })?;
            let op_type = u8::try_from(nl.op)
                .ok()
                .filter(|&o| (o as usize) < OP_CODE_COUNT)
                .ok_or_else(|| DataError::Schema {
                    line: line_no,
                    message: format!("op code {} out of range", nl.op),
                })?;
            nodes.push(AstNode::new(category, op_type, nl.in_bits, nl.out));
        }
        let g = AstGraph {
            design_id: raw.id,
            nodes,
            edges: raw.edges.into_iter().map(|[a, b]| (a, b)).collect(),
            flow: raw.flow.into_iter().map(|[a, b]| (a, b)).collect(),
        };
        g.validate(line_no)?;
        Ok(g)
    }

    fn to_line(&self) -> String {
        let raw = AstLine {
            id: self.design_id.clone(),
            n: self.nodes.len(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeLine {
                    cat: n.category.code(),
                    op: n.op_type as usize,
                    in_bits: n.in_bits,
                    out: n.out_bits,
                })
                .collect(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            flow: self.flow.iter().map(|&(a, b)| [a, b]).collect(),
        };
        serde_json::to_string(&raw).expect("AST graph serializes")
    }
}

pub fn read_ast_graphs<R: BufRead>(reader: R) -> Result<Vec<AstGraph>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DataError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(AstGraph::from_line(i + 1, &line)?);
    }
    Ok(out)
}

pub fn load_ast_graphs(path: &Path) -> Result<Vec<AstGraph>, DataError> {
    let f = File::open(path).map_err(|e| DataError::io(path, e))?;
    read_ast_graphs(BufReader::new(f))
}

pub fn write_ast_graphs<W: Write>(mut w: W, graphs: &[AstGraph]) -> std::io::Result<()> {
    for g in graphs {
        writeln!(w, "{}", g.to_line())?;
    }
    Ok(())
}

pub fn save_ast_graphs(path: &Path, graphs: &[AstGraph]) -> Result<(), DataError> {
    let f = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_ast_graphs(&mut w, graphs)
        .and_then(|_| w.flush())
        .map_err(|e| DataError::io(path, e))
}

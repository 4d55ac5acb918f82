// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::diffcore::Tensor;

/// Width of a LUT node attribute row: the 16-entry truth table of a 4-input LUT.
pub const LUT_ATTR_DIM: usize = 16;

/// Directed LUT netlist. Edges run driver to sink and never loop on a node.
#[derive(Clone, Debug, PartialEq)]
pub struct LutGraph {
    pub design_id: String,
    pub num_nodes: usize,
    /// `num_nodes x 16`
    pub node_attrs: Tensor,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct LutLine {
    id: String,
    n: usize,
    attrs: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
}

impl LutGraph {
    pub fn new(
        design_id: impl Into<String>,
        attrs: Vec<[f64; LUT_ATTR_DIM]>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self, DataError> {
        let n = attrs.len();
        let node_attrs =
            Tensor::from_rows(&attrs).map_err(|e| DataError::Invalid(e.to_string()))?;
        let node_attrs = if n == 0 {
            Tensor::zeros(&[0, LUT_ATTR_DIM])
        } else {
            node_attrs
        };
        let g = Self {
            design_id: design_id.into(),
            num_nodes: n,
            node_attrs,
            edges,
        };
        g.validate(0)?;
        Ok(g)
    }

    /// Checks the stored-form invariants; `line` is used for diagnostics.
    pub fn validate(&self, line: usize) -> Result<(), DataError> {
        let schema = |message: String| DataError::Schema { line, message };
        if self.num_nodes == 0 {
            return Err(schema(format!("graph {:?} has no nodes", self.design_id)));
        }
        if self.node_attrs.shape() != [self.num_nodes, LUT_ATTR_DIM] {
            return Err(schema(format!(
                "node_attrs shape {:?}, expected [{}, {}]",
                self.node_attrs.shape(),
                self.num_nodes,
                LUT_ATTR_DIM
            )));
        }
        if !self.node_attrs.is_finite() {
            return Err(DataError::NonFinite(format!(
                "node attributes of {:?}",
                self.design_id
            )));
        }
        for &(s, d) in &self.edges {
            if s >= self.num_nodes || d >= self.num_nodes {
                return Err(schema(format!(
                    "edge ({s}, {d}) out of range for {} nodes",
                    self.num_nodes
                )));
            }
            if s == d {
                return Err(schema(format!("self-loop on node {s}")));
            }
        }
        Ok(())
    }

    fn from_line(line_no: usize, text: &str) -> Result<Self, DataError> {
        let raw: LutLine = serde_json::from_str(text).map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.attrs.len() != raw.n {
            return Err(DataError::Schema {
                line: line_no,
                message: format!("n = {} but {} attribute rows", raw.n, raw.attrs.len()),
            });
        }
        if let Some((i, row)) = raw
            .attrs
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != LUT_ATTR_DIM)
        {
            return Err(DataError::Schema {
                line: line_no,
                message: format!(
                    "attribute row {i} has {} values, expected {LUT_ATTR_DIM}",
                    row.len()
                ),
            });
        }
        let data: Vec<f64> = raw.attrs.into_iter().flatten().collect();
        let g = LutGraph {
            design_id: raw.id,
            num_nodes: raw.n,
            node_attrs: Tensor::new(vec![raw.n, LUT_ATTR_DIM], data)
                .map_err(|e| DataError::Invalid(e.to_string()))?,
            edges: raw.edges.into_iter().map(|[s, d]| (s, d)).collect(),
        };
        g.validate(line_no)?;
        Ok(g)
    }

    fn to_line(&self) -> String {
        let raw = LutLine {
            id: self.design_id.clone(),
            n: self.num_nodes,
            attrs: (0..self.num_nodes)
                .map(|r| self.node_attrs.row(r).to_vec())
                .collect(),
            edges: self.edges.iter().map(|&(s, d)| [s, d]).collect(),
        };
        serde_json::to_string(&raw).expect("LUT graph serializes")
    }
}

/// Reads JSON Lines graphs in file order. Blank lines are skipped.
pub fn read_lut_graphs<R: BufRead>(reader: R) -> Result<Vec<LutGraph>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DataError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(LutGraph::from_line(i + 1, &line)?);
    }
    Ok(out)
}

pub fn load_lut_graphs(path: &Path) -> Result<Vec<LutGraph>, DataError> {
    let f = File::open(path).map_err(|e| DataError::io(path, e))?;
    read_lut_graphs(BufReader::new(f))
}

pub fn write_lut_graphs<W: Write>(mut w: W, graphs: &[LutGraph]) -> std::io::Result<()> {
    for g in graphs {
        writeln!(w, "{}", g.to_line())?;
    }
    Ok(())
}

pub fn save_lut_graphs(path: &Path, graphs: &[LutGraph]) -> Result<(), DataError> {
    let f = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_lut_graphs(&mut w, graphs)
        .and_then(|_| w.flush())
        .map_err(|e| DataError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: f64) -> String {
        format!("[{}]", vec![v.to_string(); LUT_ATTR_DIM].join(","))
    }

    #[test]
    fn minimal_two_node_graph() {
        let text = format!(
            "{{\"id\":\"g0\",\"n\":2,\"attrs\":[{},{}],\"edges\":[[0,1]]}}\n",
            row(0.0),
            row(1.0)
        );
        let gs = read_lut_graphs(text.as_bytes()).unwrap();
        assert_eq!(gs.len(), 1);
        assert_eq!(gs[0].num_nodes, 2);
        assert_eq!(gs[0].edges, vec![(0, 1)]);
        assert_eq!(gs[0].node_attrs.shape(), &[2, 16]);
    }

    #[test]
    fn short_attribute_row_is_schema_error() {
        let short = format!("[{}]", vec!["0"; 15].join(","));
        let text = format!(
            "\n{{\"id\":\"g\",\"n\":1,\"attrs\":[{short}],\"edges\":[]}}\n"
        );
        match read_lut_graphs(text.as_bytes()) {
            Err(DataError::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let good = format!("{{\"id\":\"g\",\"n\":1,\"attrs\":[{}],\"edges\":[]}}", row(1.0));
        let text = format!("{good}\n{{\"id\": oops}}\n");
        match read_lut_graphs(text.as_bytes()) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loops_and_range_are_checked() {
        let a = [0.0; LUT_ATTR_DIM];
        assert!(LutGraph::new("g", vec![a, a], vec![(1, 1)]).is_err());
        assert!(LutGraph::new("g", vec![a, a], vec![(0, 2)]).is_err());
        // Disconnected graphs are fine.
        assert!(LutGraph::new("g", vec![a, a, a], vec![(0, 1)]).is_ok());
    }

    #[test]
    fn overflowing_numbers_are_rejected() {
        let mut vals = vec!["0".to_string(); LUT_ATTR_DIM];
        vals[3] = "1e999".into();
        let text = format!("{{\"id\":\"g\",\"n\":1,\"attrs\":[[{}]],\"edges\":[]}}", vals.join(","));
        assert!(read_lut_graphs(text.as_bytes()).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = LutGraph> {
        (1usize..12).prop_flat_map(|n| {
            (
                "[a-z0-9_]{1,8}",
                prop::collection::vec(prop::array::uniform16(-1e3f64..1e3), n),
                prop::collection::vec((0..n, 0..n), 0..20),
            )
                .prop_map(move |(id, attrs, edges)| {
                    let edges = edges.into_iter().filter(|(s, d)| s != d).collect();
                    LutGraph::new(id, attrs, edges).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn save_load_round_trip(graphs in prop::collection::vec(arb_graph(), 1..4)) {
            let mut buf = Vec::new();
            write_lut_graphs(&mut buf, &graphs).unwrap();
            let back = read_lut_graphs(buf.as_slice()).unwrap();
            prop_assert_eq!(back, graphs);
        }
    }
}

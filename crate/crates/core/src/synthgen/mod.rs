// SPDX-License-Identifier: Apache-2.0

//! Seeded generator of aligned LUT graphs, Verilog sources, AST graphs,
//! code embeddings and labels with a known law.
//!
//! Every design has a broadcast input (node 0, think enable or reset) that
//! drives all other LUTs, `s` source LUTs fed only by it, and internal LUTs
//! with one to four earlier drivers. Truth-table bits are drawn with a
//! per-design density `p`. Labels follow
//!
//! ```text
//! ln area  = area_a  * ln(n)           + area_b  * mean(attr) + N(0, noise_sigma)
//! ln delay = delay_a * ln(1 + depth)   + delay_b * mean(attr) + N(0, noise_sigma)
//! ```
//!
//! where `depth` is the longest driver chain excluding the broadcast input.
//! The embedding of a design is a latent vector `u` with `u[0] = ln(n)`,
//! `u[1] = mean(attr)` and `u[2] = ln(1 + depth)`, each plus
//! `N(0, embed_noise)`, and standard normal distractors elsewhere; token
//! row 0 is `u` itself and further rows add `N(0, token_jitter)`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::graphio::{
    make_split_percent, save_ast_graphs, save_embeddings, save_labels, save_lut_graphs, save_split, AstGraph,
    Corpus, DataError, EmbeddingRecord, LabelRecord, LutGraph, AST_FILE, EMBED_FILE, LABEL_FILE,
    LUT_ATTR_DIM, LUT_FILE, SPLIT_FILE,
};
use crate::verilog::{parse, to_ast_graph};

pub const SPEC_FILE: &str = "synth_spec.json";
pub const VERILOG_DIR: &str = "verilog";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_designs: usize,
    /// Inclusive node-count range, broadcast input included.
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Probability of each of up to three extra drivers of an internal LUT.
    pub edge_density: f64,
    pub embed_dim: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub area_a: f64,
    pub area_b: f64,
    pub delay_a: f64,
    pub delay_b: f64,
    pub noise_sigma: f64,
    pub embed_noise: f64,
    pub token_jitter: f64,
    /// Train and validation shares of the split, in percent; test gets the rest.
    pub train_percent: usize,
    pub val_percent: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_designs: 1000,
            min_nodes: 4,
            max_nodes: 64,
            edge_density: 0.3,
            embed_dim: 64,
            min_tokens: 4,
            max_tokens: 12,
            area_a: 1.0,
            area_b: 1.0,
            delay_a: 1.0,
            delay_b: 0.5,
            noise_sigma: 0.05,
            embed_noise: 0.1,
            token_jitter: 0.1,
            train_percent: 75,
            val_percent: 10,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Invalid(format!("synth spec: {m}")));
        if self.min_nodes < 3 || self.min_nodes > self.max_nodes {
            return bad(format!("node range {}..={} (minimum 3)", self.min_nodes, self.max_nodes));
        }
        if self.embed_dim < 3 {
            return bad(format!("embed_dim {} < 3", self.embed_dim));
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad(format!("token range {}..={}", self.min_tokens, self.max_tokens));
        }
        if !(0.0..=1.0).contains(&self.edge_density) {
            return bad(format!("edge_density {}", self.edge_density));
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("embed_noise", self.embed_noise),
            ("token_jitter", self.token_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} {v}"));
            }
        }
        for v in [self.area_a, self.area_b, self.delay_a, self.delay_b] {
            if !v.is_finite() {
                return bad("non-finite law coefficient".into());
            }
        }
        Ok(())
    }
}

/// Everything generated for one design.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthDesign {
    pub lut: LutGraph,
    pub verilog: String,
    pub ast: AstGraph,
    pub embedding: EmbeddingRecord,
    pub label: LabelRecord,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub designs: BTreeMap<String, SynthDesign>,
    pub corpus: Corpus,
}

pub fn design_id(i: usize) -> String {
    format!("syn{i:05}")
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("validated sigma")
}

/// Longest driver chain, not counting edges from node 0.
fn logic_depth(n: usize, drivers: &[Vec<usize>]) -> usize {
    let mut depth = vec![0usize; n];
    for d in 1..n {
        depth[d] = drivers[d]
            .iter()
            .filter(|&&s| s != 0)
            .map(|&s| depth[s] + 1)
            .max()
            .unwrap_or(0);
    }
    depth.into_iter().max().unwrap_or(0)
}

fn signal(i: usize, sources: usize) -> String {
    if i <= sources {
        format!("x[{}]", i - 1)
    } else {
        format!("w{i}")
    }
}

/// Structural Verilog for the LUT network: each internal LUT folds its
/// drivers with an operator picked from its truth table.
fn render_verilog(id: &str, attrs: &[[f64; LUT_ATTR_DIM]], drivers: &[Vec<usize>], sources: usize) -> String {
    let n = attrs.len();
    let mut v = format!("module {id}(input en, input [{}:0] x, output y);\n", sources - 1);
    for i in sources + 1..n {
        v += &format!("  wire w{i};\n");
    }
    for i in sources + 1..n {
        let ones = attrs[i].iter().filter(|&&b| b > 0.5).count();
        let op = ["&", "|", "^"][ones % 3];
        let terms: Vec<String> = drivers[i]
            .iter()
            .filter(|&&s| s != 0)
            .map(|&s| signal(s, sources))
            .collect();
        let body = terms.join(&format!(" {op} "));
        if ones % 2 == 1 {
            v += &format!("  assign w{i} = ~({body});\n");
        } else {
            v += &format!("  assign w{i} = {body};\n");
        }
    }
    v += &format!("  assign y = en & {};\n", signal(n - 1, sources));
    v += "endmodule\n";
    v
}

fn generate_design(spec: &SynthSpec, index: usize) -> SynthDesign {
    let id = design_id(index);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);

    let n = rng.random_range(spec.min_nodes..=spec.max_nodes);
    let p: f64 = rng.random_range(0.1..0.9);
    let attrs: Vec<[f64; LUT_ATTR_DIM]> = (0..n)
        .map(|_| std::array::from_fn(|_| f64::from(u8::from(rng.random_bool(p)))))
        .collect();
    let sources = 1 + (n - 1) / 8;
    let mut drivers = vec![Vec::new(); n];
    for (d, ds) in drivers.iter_mut().enumerate().skip(1) {
        ds.push(0);
        if d > sources {
            ds.push(rng.random_range(1..d));
            for _ in 0..3 {
                if rng.random_bool(spec.edge_density) {
                    let s = rng.random_range(1..d);
                    if !ds.contains(&s) {
                        ds.push(s);
                    }
                }
            }
        }
    }
    let edges: Vec<(usize, usize)> = drivers
        .iter()
        .enumerate()
        .flat_map(|(d, ds)| ds.iter().map(move |&s| (s, d)))
        .collect();
    let lut = LutGraph::new(&id, attrs.clone(), edges).expect("generated graphs are well formed");

    let mean_attr = attrs.iter().flatten().sum::<f64>() / (n * LUT_ATTR_DIM) as f64;
    let depth = logic_depth(n, &drivers);
    let label_noise = normal(spec.noise_sigma);
    let log_area = spec.area_a * (n as f64).ln() + spec.area_b * mean_attr + label_noise.sample(&mut rng);
    let log_delay =
        spec.delay_a * (1.0 + depth as f64).ln() + spec.delay_b * mean_attr + label_noise.sample(&mut rng);
    let label = LabelRecord::new(&id, log_area.exp(), log_delay.exp()).expect("exp is positive");

    let embed_noise = normal(spec.embed_noise);
    let mut u: Vec<f64> = (0..spec.embed_dim).map(|_| normal(1.0).sample(&mut rng)).collect();
    u[0] = (n as f64).ln() + embed_noise.sample(&mut rng);
    u[1] = mean_attr + embed_noise.sample(&mut rng);
    u[2] = (1.0 + depth as f64).ln() + embed_noise.sample(&mut rng);
    let rows = rng.random_range(spec.min_tokens..=spec.max_tokens);
    let jitter = normal(spec.token_jitter);
    let mut data = Vec::with_capacity(rows * spec.embed_dim);
    for r in 0..rows {
        for &x in &u {
            let v = if r == 0 { x } else { x + jitter.sample(&mut rng) };
            data.push(v as f32);
        }
    }
    let embedding = EmbeddingRecord::new(&id, rows, spec.embed_dim, data, false).expect("finite embedding");

    let verilog = render_verilog(&id, &attrs, &drivers, sources);
    let module = parse(&verilog).unwrap_or_else(|e| panic!("template for {id} does not parse: {e}"));
    let ast = to_ast_graph(&module);

    SynthDesign {
        lut,
        verilog,
        ast,
        embedding,
        label,
        depth,
    }
}

/// Builds the corpus in memory. Each design draws from its own ChaCha
/// stream, so a design does not depend on how many others are generated.
pub fn generate_corpus(spec: &SynthSpec) -> Result<SynthCorpus, DataError> {
    spec.validate()?;
    let designs: BTreeMap<String, SynthDesign> = (0..spec.n_designs)
        .map(|i| (design_id(i), generate_design(spec, i)))
        .collect();
    let ids: Vec<String> = designs.keys().cloned().collect();
    let split = make_split_percent(&ids, spec.seed, spec.train_percent, spec.val_percent)?;
    let corpus = Corpus {
        labels: designs.iter().map(|(k, d)| (k.clone(), d.label.clone())).collect(),
        split,
        lut: designs.iter().map(|(k, d)| (k.clone(), d.lut.clone())).collect(),
        ast: designs.iter().map(|(k, d)| (k.clone(), d.ast.clone())).collect(),
        embeddings: designs.iter().map(|(k, d)| (k.clone(), d.embedding.clone())).collect(),
    };
    Ok(SynthCorpus {
        spec: spec.clone(),
        designs,
        corpus,
    })
}

/// Writes every graphio file plus `verilog/<id>.v` and the spec echo into
/// `out_dir`, creating it when needed.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<SynthCorpus, DataError> {
    let synth = generate_corpus(spec)?;
    let vdir = out_dir.join(VERILOG_DIR);
    fs::create_dir_all(&vdir).map_err(|e| DataError::io(&vdir, e))?;
    let c = &synth.corpus;
    save_lut_graphs(&out_dir.join(LUT_FILE), &c.lut.values().cloned().collect::<Vec<_>>())?;
    save_ast_graphs(&out_dir.join(AST_FILE), &c.ast.values().cloned().collect::<Vec<_>>())?;
    save_embeddings(&out_dir.join(EMBED_FILE), c.embeddings.values())?;
    save_labels(&out_dir.join(LABEL_FILE), c.labels.values())?;
    save_split(&out_dir.join(SPLIT_FILE), &c.split)?;
    for (id, d) in &synth.designs {
        let path = vdir.join(format!("{id}.v"));
        fs::write(&path, &d.verilog).map_err(|e| DataError::io(&path, e))?;
    }
    let spec_path = out_dir.join(SPEC_FILE);
    let text = serde_json::to_string_pretty(spec).expect("spec serializes") + "\n";
    fs::write(&spec_path, text).map_err(|e| DataError::io(&spec_path, e))?;
    Ok(synth)
}

// SPDX-License-Identifier: Apache-2.0

//! The three regressors: the LUT-graph teacher, the AST-graph baseline that
//! shares its trunk, and the embedding decoder student.
//!
//! Every model ends in a stack of `hidden_dim` ReLU layers followed by a
//! scalar output layer; the activation entering the output layer is the
//! model's last hidden representation `z`.

mod checkpoint;
mod graph;
mod student;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{Bound, Mode, ParamSet, RunningStats, Tape, Tensor, TensorError, Var};
use crate::graphio::{DataError, LUT_ATTR_DIM};
use crate::verilog::{encode_nodes, init_node_encoder, NODE_FEATURE_DIM};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta,
    CKPT_MAGIC, CKPT_VERSION,
};
pub use graph::{gcn_normalize, graph_conv, GraphBatch, NodeInputs, PreparedGraph};
pub use student::{embedding_batch, pool_embedding};

pub const CONV_DIM: usize = 64;
pub const CONV_LAYERS: usize = 3;
pub const HIDDEN_DIM: usize = 512;
pub const HEAD_LAYERS: usize = 3;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("input mismatch: {0}")]
    Input(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Teacher,
    AstGnn,
    Student,
}

impl ModelKind {
    pub fn is_graph(self) -> bool {
        !matches!(self, ModelKind::Student)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Node attribute width for graph models, embedding width for the student.
    pub in_dim: usize,
    pub conv_dim: usize,
    pub conv_layers: usize,
    pub hidden_dim: usize,
    pub head_layers: usize,
}

impl ModelConfig {
    pub fn teacher() -> Self {
        Self {
            kind: ModelKind::Teacher,
            in_dim: LUT_ATTR_DIM,
            conv_dim: CONV_DIM,
            conv_layers: CONV_LAYERS,
            hidden_dim: HIDDEN_DIM,
            head_layers: HEAD_LAYERS,
        }
    }

    pub fn ast_gnn() -> Self {
        Self {
            kind: ModelKind::AstGnn,
            in_dim: NODE_FEATURE_DIM,
            ..Self::teacher()
        }
    }

    pub fn student(dim_embed: usize) -> Self {
        Self {
            kind: ModelKind::Student,
            in_dim: dim_embed,
            conv_dim: 0,
            conv_layers: 0,
            hidden_dim: HIDDEN_DIM,
            head_layers: HEAD_LAYERS,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.in_dim == 0 || self.hidden_dim == 0 || self.head_layers == 0 {
            return bad("in_dim, hidden_dim and head_layers must be positive");
        }
        match self.kind {
            ModelKind::Teacher if self.in_dim != LUT_ATTR_DIM => bad("teacher in_dim must be 16"),
            ModelKind::AstGnn if self.in_dim != NODE_FEATURE_DIM => bad("AST model in_dim must be 16"),
            ModelKind::Teacher | ModelKind::AstGnn if self.conv_layers == 0 || self.conv_dim == 0 => {
                bad("graph models need at least one convolution")
            }
            ModelKind::Student if self.conv_layers != 0 || self.conv_dim != 0 => {
                bad("the student has no convolutions")
            }
            _ => Ok(()),
        }
    }

    fn readout_dim(&self) -> usize {
        match self.kind {
            ModelKind::Student => self.hidden_dim,
            _ => 2 * self.conv_dim,
        }
    }

    /// Whether the student needs a projection to the hidden width.
    pub fn has_projection(&self) -> bool {
        self.kind == ModelKind::Student && self.in_dim != self.hidden_dim
    }

    /// Names and shapes of every parameter the architecture defines.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        if self.kind == ModelKind::AstGnn {
            for (name, classes) in crate::verilog::ENCODER_TABLES {
                out.push((name.to_string(), vec![classes, crate::verilog::PROJ_DIM]));
            }
        }
        let mut d = self.in_dim;
        for i in 0..self.conv_layers {
            out.push((format!("conv{i}.weight"), vec![d, self.conv_dim]));
            out.push((format!("bn{i}.gamma"), vec![self.conv_dim]));
            out.push((format!("bn{i}.beta"), vec![self.conv_dim]));
            d = self.conv_dim;
        }
        if self.has_projection() {
            out.push(("proj.weight".into(), vec![self.in_dim, self.hidden_dim]));
            out.push(("proj.bias".into(), vec![self.hidden_dim]));
        }
        let mut d = self.readout_dim();
        for j in 0..self.head_layers {
            out.push((format!("head{j}.weight"), vec![d, self.hidden_dim]));
            out.push((format!("head{j}.bias"), vec![self.hidden_dim]));
            d = self.hidden_dim;
        }
        out.push(("out.weight".into(), vec![self.hidden_dim, 1]));
        out.push(("out.bias".into(), vec![1]));
        out
    }
}

/// Input batch of a model.
#[derive(Clone, Debug)]
pub enum ModelInput {
    Graphs(GraphBatch),
    /// Pooled embeddings, `B x dim`.
    Embeddings(Tensor),
}

impl ModelInput {
    pub fn batch_size(&self) -> usize {
        match self {
            ModelInput::Graphs(g) => g.num_graphs(),
            ModelInput::Embeddings(t) => t.shape()[0],
        }
    }
}

/// Tape handles of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    /// `B x 1`.
    pub pred: Var,
    /// `B x hidden_dim`, the input of the output layer.
    pub z: Var,
}

/// Plain values of an eval-mode forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub pred: Vec<f64>,
    pub z: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    /// One entry per batch-norm layer.
    pub stats: Vec<RunningStats>,
}

impl Model {
    /// Weights and biases are drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// batch-norm scales start at 1 and shifts at 0.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamSet::new();
        if config.kind == ModelKind::AstGnn {
            init_node_encoder(&mut params, rng);
        }
        // Biases follow their weight in `param_shapes` and share its fan-in.
        let mut fan_in = 1;
        for (name, shape) in config.param_shapes() {
            if name.starts_with("encoder.") {
                continue;
            }
            let value = if name.ends_with(".gamma") {
                Tensor::full(&shape, 1.0)
            } else if name.ends_with(".beta") {
                Tensor::zeros(&shape)
            } else {
                if name.ends_with(".weight") {
                    fan_in = shape[0];
                }
                Tensor::uniform(&shape, 1.0 / (fan_in as f64).sqrt(), rng)
            };
            params.insert(name, value);
        }
        let stats = (0..config.conv_layers)
            .map(|_| RunningStats::new(config.conv_dim))
            .collect();
        Ok(Self { config, params, stats })
    }

    pub fn teacher<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(ModelConfig::teacher(), rng).expect("default config is valid")
    }

    pub fn ast_gnn<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(ModelConfig::ast_gnn(), rng).expect("default config is valid")
    }

    pub fn student<R: Rng + ?Sized>(dim_embed: usize, rng: &mut R) -> Result<Self, ModelError> {
        Self::new(ModelConfig::student(dim_embed), rng)
    }

    /// Layer names and shapes past the input featurizer.
    pub fn shape_signature(&self) -> Vec<(String, Vec<usize>)> {
        self.params
            .iter()
            .filter(|(n, _)| !n.starts_with("encoder."))
            .map(|(n, p)| (n.to_string(), p.value.shape().to_vec()))
            .collect()
    }

    /// Records a forward pass. Train mode updates `stats`.
    pub fn forward_with(
        config: &ModelConfig,
        tape: &Tape,
        params: &Bound,
        input: &ModelInput,
        mode: Mode,
        stats: &mut [RunningStats],
    ) -> Result<Forward, ModelError> {
        let p = |name: String| {
            params
                .get(&name)
                .ok_or(ModelError::Tensor(TensorError::UnknownParam(name)))
        };
        let readout = match (config.kind, input) {
            (ModelKind::Student, ModelInput::Embeddings(e)) => {
                if e.shape().len() != 2 || e.shape()[1] != config.in_dim {
                    return Err(ModelError::Input(format!(
                        "embedding batch {:?}, model expects width {}",
                        e.shape(),
                        config.in_dim
                    )));
                }
                let x = tape.constant(e.clone());
                if config.has_projection() {
                    tape.linear(x, p("proj.weight".into())?, Some(p("proj.bias".into())?))?
                } else {
                    x
                }
            }
            (ModelKind::Teacher | ModelKind::AstGnn, ModelInput::Graphs(g)) => {
                let mut h = match (&g.inputs, config.kind) {
                    (NodeInputs::Dense(t), ModelKind::Teacher) => {
                        g.check_lut_width()?;
                        tape.constant(t.clone())
                    }
                    (NodeInputs::Ast(nodes), ModelKind::AstGnn) => encode_nodes(tape, params, nodes)?,
                    _ => {
                        return Err(ModelError::Input(format!(
                            "{:?} model given the other graph kind",
                            config.kind
                        )))
                    }
                };
                if stats.len() != config.conv_layers {
                    return Err(ModelError::Config(format!(
                        "{} batch-norm states for {} layers",
                        stats.len(),
                        config.conv_layers
                    )));
                }
                for (i, st) in stats.iter_mut().enumerate() {
                    h = graph_conv(tape, h, &g.adj, p(format!("conv{i}.weight"))?)?;
                    h = tape.batch_norm(h, p(format!("bn{i}.gamma"))?, p(format!("bn{i}.beta"))?, st, mode)?;
                    h = tape.relu(h)?;
                }
                let mean = tape.segment_mean(h, g.offsets.clone())?;
                let max = tape.segment_max(h, g.offsets.clone())?;
                tape.concat_cols(&[mean, max])?
            }
            (kind, _) => {
                return Err(ModelError::Input(format!("{kind:?} model given the wrong input modality")))
            }
        };
        let mut z = readout;
        for j in 0..config.head_layers {
            z = tape.linear(z, p(format!("head{j}.weight"))?, Some(p(format!("head{j}.bias"))?))?;
            z = tape.relu(z)?;
        }
        let pred = tape.linear(z, p("out.weight".into())?, Some(p("out.bias".into())?))?;
        Ok(Forward { pred, z })
    }

    /// Train-mode pass with batch statistics; running statistics are updated.
    pub fn forward_train(&mut self, tape: &Tape, params: &Bound, input: &ModelInput) -> Result<Forward, ModelError> {
        Self::forward_with(&self.config, tape, params, input, Mode::Train, &mut self.stats)
    }

    /// Eval-mode pass using the running statistics.
    pub fn forward_eval(&self, tape: &Tape, params: &Bound, input: &ModelInput) -> Result<Forward, ModelError> {
        let mut stats = self.stats.clone();
        Self::forward_with(&self.config, tape, params, input, Mode::Eval, &mut stats)
    }

    /// Eval-mode predictions and last hidden activations, without gradients.
    pub fn predict(&self, input: &ModelInput) -> Result<Prediction, ModelError> {
        let tape = Tape::new();
        let bound = self.params.bind_constants(&tape);
        let fwd = self.forward_eval(&tape, &bound, input)?;
        let pred = tape.value(fwd.pred).data().to_vec();
        Ok(Prediction {
            pred,
            z: tape.to_tensor(fwd.z),
        })
    }

    /// The activation entering the output layer, `B x hidden_dim`.
    pub fn extract_last_hidden(&self, input: &ModelInput) -> Result<Tensor, ModelError> {
        Ok(self.predict(input)?.z)
    }
}

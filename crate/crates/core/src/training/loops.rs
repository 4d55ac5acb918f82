// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{combine_losses, loss_kd, loss_sl};
use super::optim::Optimizer;
use super::schedule::{LossWeights, LrSchedule, LrState};
use super::{BaselineVariant, TrainConfig, TrainError};
use crate::diffcore::{Tape, Tensor};
use crate::graphio::{Corpus, LabelNormalizer};
use crate::models::{
    pool_embedding, Checkpoint, CheckpointMeta, GraphBatch, Model, ModelConfig, ModelError,
    ModelInput, ModelKind, PreparedGraph,
};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub alpha: f64,
    /// Mean supervised loss over the epoch's training examples.
    pub train_sl: f64,
    /// Mean distillation loss, absent when no teacher is involved.
    pub train_kd: Option<f64>,
    /// Supervised loss on the validation split (standardized labels).
    pub val_metric: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val: f64,
    /// Teacher parameter digests before and after training, for KD runs.
    pub teacher_fingerprints: Option<(String, String)>,
}

/// Splits `ids` into chunks of `batch_size`, folding a trailing single
/// example into the previous chunk.
pub fn make_batches<T: Clone>(ids: &[T], batch_size: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = ids.chunks(batch_size.max(1)).map(<[T]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

enum Feed {
    Graphs(BTreeMap<String, PreparedGraph>),
    Embeddings { dim: usize, rows: BTreeMap<String, Vec<f64>> },
}

impl Feed {
    fn input(&self, ids: &[String]) -> ModelInput {
        match self {
            Feed::Graphs(g) => {
                let parts: Vec<&PreparedGraph> = ids.iter().map(|id| &g[id]).collect();
                ModelInput::Graphs(GraphBatch::assemble(&parts))
            }
            Feed::Embeddings { dim, rows } => {
                let data: Vec<f64> = ids.iter().flat_map(|id| rows[id].iter().copied()).collect();
                ModelInput::Embeddings(Tensor::new(vec![ids.len(), *dim], data).expect("pooled rows"))
            }
        }
    }
}

fn require<T>(map: &BTreeMap<String, T>, ids: &[String], what: &'static str) -> Result<(), TrainError> {
    let missing: Vec<String> = ids.iter().filter(|id| !map.contains_key(*id)).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(TrainError::Alignment {
            what,
            count: missing.len(),
            ids: missing,
        })
    }
}

struct Prepared {
    train: Vec<String>,
    val: Vec<String>,
    normalizer: LabelNormalizer,
    targets: BTreeMap<String, f64>,
}

fn prepare_labels(corpus: &Corpus, cfg: &TrainConfig) -> Result<Prepared, TrainError> {
    let train = corpus.split.train.clone();
    let val = corpus.split.val.clone();
    if train.len() < 2 || val.is_empty() {
        return Err(TrainError::Config(format!(
            "need at least 2 training and 1 validation designs, got {} and {}",
            train.len(),
            val.len()
        )));
    }
    let all: Vec<String> = train.iter().chain(&val).cloned().collect();
    require(&corpus.labels, &all, "a label")?;
    let raw: Vec<f64> = train
        .iter()
        .map(|id| corpus.labels[id].log_value(cfg.target))
        .collect();
    let normalizer = LabelNormalizer::fit(&raw)?;
    let targets = all
        .iter()
        .map(|id| (id.clone(), normalizer.apply(corpus.labels[id].log_value(cfg.target))))
        .collect();
    Ok(Prepared {
        train,
        val,
        normalizer,
        targets,
    })
}

fn graph_feed(corpus: &Corpus, ids: &[String], kind: ModelKind) -> Result<Feed, TrainError> {
    let mut out = BTreeMap::new();
    if kind == ModelKind::Teacher {
        require(&corpus.lut, ids, "a LUT graph")?;
        for id in ids {
            out.insert(id.clone(), PreparedGraph::from_lut(&corpus.lut[id]));
        }
    } else {
        require(&corpus.ast, ids, "an AST graph")?;
        for id in ids {
            out.insert(id.clone(), PreparedGraph::from_ast(&corpus.ast[id]));
        }
    }
    Ok(Feed::Graphs(out))
}

fn embedding_feed(corpus: &Corpus, ids: &[String]) -> Result<(Feed, usize), TrainError> {
    require(&corpus.embeddings, ids, "an embedding")?;
    let dim = corpus.embeddings[&ids[0]].dim;
    let mut rows = BTreeMap::new();
    for id in ids {
        let e = &corpus.embeddings[id];
        if e.dim != dim {
            return Err(ModelError::Input(format!("embedding {id:?} has dim {}, expected {dim}", e.dim)).into());
        }
        rows.insert(id.clone(), pool_embedding(e));
    }
    Ok((Feed::Embeddings { dim, rows }, dim))
}

/// Eval-mode outputs of `model` for `ids`, in chunks.
fn eval_outputs(
    model: &Model,
    feed: &Feed,
    ids: &[String],
    chunk: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), TrainError> {
    let mut preds = Vec::with_capacity(ids.len());
    let mut zs = Vec::with_capacity(ids.len());
    for part in ids.chunks(chunk.max(1)) {
        let out = model.predict(&feed.input(part))?;
        preds.extend(out.pred);
        let d = out.z.shape()[1];
        zs.extend(out.z.data().chunks_exact(d).map(<[f64]>::to_vec));
    }
    Ok((preds, zs))
}

struct Run<'a> {
    cfg: &'a TrainConfig,
    schedule: LrSchedule,
    weights: LossWeights,
    feed: Feed,
    labels: Prepared,
    /// Frozen teacher hidden vectors for the training designs.
    teacher_z: Option<BTreeMap<String, Vec<f64>>>,
    echo: serde_json::Value,
}

impl Run<'_> {
    fn execute(self, mut model: Model, mut rng: ChaCha8Rng) -> Result<TrainOutcome, TrainError> {
        let cfg = self.cfg;
        let mut opt = Optimizer::new(cfg.optimizer.clone());
        let mut lr_state = LrState::new(&self.schedule, cfg.lr);
        let mut order = self.labels.train.clone();
        let mut best: Option<(f64, usize, Model)> = None;
        let mut log = Vec::with_capacity(cfg.max_epochs);
        let hidden = model.config.hidden_dim;

        for epoch in 0..cfg.max_epochs {
            let lr = lr_state.lr(epoch);
            let alpha = if self.teacher_z.is_some() {
                self.weights.alpha_at(epoch)
            } else {
                1.0
            };
            order.shuffle(&mut rng);
            let (mut sl_sum, mut kd_sum) = (0.0, 0.0);
            for batch in make_batches(&order, cfg.batch_size) {
                let b = batch.len();
                let input = self.feed.input(&batch);
                let tape = Tape::new();
                let bound = model.params.bind(&tape);
                let fwd = model.forward_train(&tape, &bound, &input)?;
                let y: Vec<f64> = batch.iter().map(|id| self.labels.targets[id]).collect();
                let y = tape.constant(Tensor::new(vec![b, 1], y)?);
                let sl = loss_sl(&tape, fwd.pred, y)?;
                let loss = match &self.teacher_z {
                    Some(tz) => {
                        let zt: Vec<f64> = batch.iter().flat_map(|id| tz[id].iter().copied()).collect();
                        let zt = tape.constant(Tensor::new(vec![b, hidden], zt)?);
                        let kd = loss_kd(&tape, fwd.z, zt)?;
                        kd_sum += tape.item(kd).unwrap_or(f64::NAN) * b as f64;
                        combine_losses(&tape, sl, kd, alpha)?
                    }
                    None => sl,
                };
                sl_sum += tape.item(sl).unwrap_or(f64::NAN) * b as f64;
                tape.backward(loss)?;
                model.params.zero_grad();
                model.params.accumulate_grads(&tape, &bound)?;
                opt.step(&mut model.params, lr);
            }
            let n = order.len() as f64;
            let train_sl = sl_sum / n;
            if !train_sl.is_finite() {
                return Err(TrainError::Config(format!(
                    "training diverged at epoch {epoch} (lr {lr}); lower the learning rate"
                )));
            }

            let (preds, _) = eval_outputs(&model, &self.feed, &self.labels.val, cfg.batch_size)?;
            let val_metric = preds
                .iter()
                .zip(&self.labels.val)
                .map(|(p, id)| (p - self.labels.targets[id]).powi(2))
                .sum::<f64>()
                / preds.len() as f64;
            if best.as_ref().is_none_or(|(v, _, _)| val_metric < *v) {
                best = Some((val_metric, epoch, model.clone()));
            }
            lr_state.end_epoch(val_metric);
            log.push(EpochLog {
                epoch,
                lr,
                alpha,
                train_sl,
                train_kd: self.teacher_z.as_ref().map(|_| kd_sum / n),
                val_metric,
            });
        }

        let (best_val, best_epoch, best_model) = best.expect("at least one epoch ran");
        Ok(TrainOutcome {
            checkpoint: Checkpoint {
                meta: CheckpointMeta {
                    model: best_model.config.clone(),
                    seed: cfg.seed,
                    target: cfg.target,
                    normalizer: self.labels.normalizer,
                    training: self.echo,
                },
                model: best_model,
            },
            log,
            best_epoch,
            best_val,
            teacher_fingerprints: None,
        })
    }
}

fn echo(variant: &str, cfg: &TrainConfig, schedule: &LrSchedule, weights: &LossWeights) -> serde_json::Value {
    serde_json::json!({
        "variant": variant,
        "config": cfg,
        "effective_schedule": schedule,
        "effective_alpha": weights,
    })
}

/// Trains a graph model on labels only, with the plateau scheduler unless
/// configured otherwise.
fn train_graph_sl(corpus: &Corpus, cfg: &TrainConfig, config: ModelConfig, variant: &str) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let labels = prepare_labels(corpus, cfg)?;
    let ids: Vec<String> = labels.train.iter().chain(&labels.val).cloned().collect();
    let feed = graph_feed(corpus, &ids, config.kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Model::new(config, &mut rng)?;
    let schedule = cfg.schedule.clone().unwrap_or_else(LrSchedule::plateau);
    let weights = LossWeights::constant(1.0)?;
    Run {
        echo: echo(variant, cfg, &schedule, &weights),
        cfg,
        schedule,
        weights,
        feed,
        labels,
        teacher_z: None,
    }
    .execute(model, rng)
}

/// Supervised pretraining of the LUT-graph teacher.
pub fn pretrain_teacher(corpus: &Corpus, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_graph_sl(corpus, cfg, ModelConfig::teacher(), "teacher")
}

/// Trains `config` against labels and the frozen teacher's hidden vectors.
fn train_kd(
    corpus: &Corpus,
    teacher: &Checkpoint,
    cfg: &TrainConfig,
    config_for: impl FnOnce(Option<usize>) -> ModelConfig,
    variant: &str,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if teacher.meta.model.kind != ModelKind::Teacher {
        return Err(TrainError::Config("the teacher checkpoint is not a LUT-graph model".into()));
    }
    if teacher.meta.target != cfg.target {
        return Err(TrainError::Config(format!(
            "teacher was trained for {}, this run targets {}",
            teacher.meta.target, cfg.target
        )));
    }
    let labels = prepare_labels(corpus, cfg)?;
    let ids: Vec<String> = labels.train.iter().chain(&labels.val).cloned().collect();
    let (feed, dim) = if variant == "ast_gnn_kd" {
        (graph_feed(corpus, &ids, ModelKind::AstGnn)?, None)
    } else {
        let (f, d) = embedding_feed(corpus, &ids)?;
        (f, Some(d))
    };
    let config = config_for(dim);
    if config.hidden_dim != teacher.meta.model.hidden_dim {
        return Err(ModelError::Input(format!(
            "student hidden width {} differs from teacher's {}",
            config.hidden_dim, teacher.meta.model.hidden_dim
        ))
        .into());
    }

    let mut frozen = teacher.model.clone();
    frozen.params.freeze();
    let before = frozen.params.fingerprint();
    let teacher_feed = graph_feed(corpus, &labels.train, ModelKind::Teacher)?;
    let (_, zs) = eval_outputs(&frozen, &teacher_feed, &labels.train, cfg.batch_size)?;
    let teacher_z = labels.train.iter().cloned().zip(zs).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Model::new(config, &mut rng)?;
    let schedule = cfg.schedule.clone().unwrap_or_else(LrSchedule::cosine);
    let mut out = Run {
        echo: echo(variant, cfg, &schedule, &cfg.alpha),
        cfg,
        schedule,
        weights: cfg.alpha.clone(),
        feed,
        labels,
        teacher_z: Some(teacher_z),
    }
    .execute(model, rng)?;
    out.teacher_fingerprints = Some((before, frozen.params.fingerprint()));
    Ok(out)
}

/// Trains the embedding decoder with the combined loss against a frozen
/// teacher. The cosine scheduler is used unless configured otherwise.
pub fn train_student_kd(corpus: &Corpus, teacher: &Checkpoint, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_kd(
        corpus,
        teacher,
        cfg,
        |dim| ModelConfig::student(dim.expect("embedding feed")),
        "student_kd",
    )
}

/// Baselines: the AST graph model with or without distillation, and the
/// embedding decoder trained on labels alone (alpha fixed at 1).
pub fn train_baseline(
    variant: BaselineVariant,
    corpus: &Corpus,
    teacher: Option<&Checkpoint>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    match variant {
        BaselineVariant::AstGnn => train_graph_sl(corpus, cfg, ModelConfig::ast_gnn(), "ast_gnn"),
        BaselineVariant::AstGnnKd => {
            let teacher = teacher.ok_or_else(|| TrainError::Config("ast_gnn_kd needs a teacher checkpoint".into()))?;
            train_kd(corpus, teacher, cfg, |_| ModelConfig::ast_gnn(), "ast_gnn_kd")
        }
        BaselineVariant::LlmDecoder => {
            cfg.validate()?;
            let labels = prepare_labels(corpus, cfg)?;
            let ids: Vec<String> = labels.train.iter().chain(&labels.val).cloned().collect();
            let (feed, dim) = embedding_feed(corpus, &ids)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let model = Model::new(ModelConfig::student(dim), &mut rng)?;
            let schedule = cfg.schedule.clone().unwrap_or_else(LrSchedule::plateau);
            let weights = LossWeights::constant(1.0)?;
            Run {
                echo: echo("llm_decoder", cfg, &schedule, &weights),
                cfg,
                schedule,
                weights,
                feed,
                labels,
                teacher_z: None,
            }
            .execute(model, rng)
        }
    }
}

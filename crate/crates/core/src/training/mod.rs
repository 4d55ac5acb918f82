// SPDX-License-Identifier: Apache-2.0

//! Losses, learning-rate and loss-weight schedules, optimizers, and the
//! training loops for the teacher, the distilled student and the baselines.

mod loops;
mod losses;
mod optim;
mod schedule;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::TensorError;
use crate::graphio::{DataError, Target};
use crate::models::ModelError;

pub use loops::{
    make_batches, pretrain_teacher, train_baseline, train_student_kd, EpochLog, TrainOutcome,
};
pub use losses::{check_alpha, combine_losses, loss_kd, loss_sl, loss_total};
pub use optim::{Optimizer, OptimizerConfig};
pub use schedule::{
    alpha_at, cosine_lr, plateau_step, CosineScheduler, LossWeights, LrSchedule, PlateauScheduler,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{count} design(s) lack {what}: {}", .ids.join(", "))]
    Alignment { what: &'static str, count: usize, ids: Vec<String> },
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineVariant {
    /// AST graph model trained on labels only.
    AstGnn,
    /// AST graph model distilled from the teacher.
    AstGnnKd,
    /// Embedding decoder trained on labels only.
    LlmDecoder,
}

impl fmt::Display for BaselineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineVariant::AstGnn => "ast_gnn",
            BaselineVariant::AstGnnKd => "ast_gnn_kd",
            BaselineVariant::LlmDecoder => "llm_decoder",
        })
    }
}

impl FromStr for BaselineVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ast_gnn" => Ok(BaselineVariant::AstGnn),
            "ast_gnn_kd" => Ok(BaselineVariant::AstGnnKd),
            "llm_decoder" => Ok(BaselineVariant::LlmDecoder),
            other => Err(format!(
                "unknown baseline {other:?} (expected ast_gnn, ast_gnn_kd or llm_decoder)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub target: Target,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Initial (or peak, for cosine) learning rate.
    pub lr: f64,
    pub optimizer: OptimizerConfig,
    /// `None` picks the loop's default: plateau for label-only training,
    /// cosine with warm restarts for distillation.
    pub schedule: Option<LrSchedule>,
    pub alpha: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            target: Target::Area,
            batch_size: 1024,
            max_epochs: 300,
            lr: 1e-3,
            optimizer: OptimizerConfig::default(),
            schedule: None,
            alpha: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.batch_size < 2 {
            return bad(format!("batch_size {} < 2 (batch norm needs two rows)", self.batch_size));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr {} must be positive", self.lr));
        }
        self.optimizer.validate().map_err(TrainError::Config)?;
        self.alpha.validate()?;
        match self.schedule {
            Some(LrSchedule::Plateau { factor, .. }) if !(factor > 0.0 && factor < 1.0) => {
                bad(format!("plateau factor {factor} outside (0, 1)"))
            }
            Some(LrSchedule::Cosine { period: 0, .. }) => bad("cosine period must be positive".into()),
            Some(LrSchedule::Cosine { lr_min, .. }) if !(lr_min >= 0.0 && lr_min <= self.lr) => {
                bad(format!("cosine lr_min {lr_min} outside [0, lr]"))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests;

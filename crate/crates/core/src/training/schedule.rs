// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::TrainError;

/// Step schedule for the supervised weight `alpha`: each `(epoch, value)`
/// pair takes effect at its epoch, inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub schedule: Vec<(usize, f64)>,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            schedule: vec![(0, 0.5), (150, 0.75), (250, 1.0)],
        }
    }
}

impl LossWeights {
    pub fn new(schedule: Vec<(usize, f64)>) -> Result<Self, TrainError> {
        let w = Self { schedule };
        w.validate()?;
        Ok(w)
    }

    pub fn constant(alpha: f64) -> Result<Self, TrainError> {
        Self::new(vec![(0, alpha)])
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        match self.schedule.first() {
            Some((0, _)) => {}
            _ => return bad("alpha schedule must start at epoch 0".into()),
        }
        for w in self.schedule.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad(format!("alpha thresholds not increasing: {} then {}", w[0].0, w[1].0));
            }
        }
        for &(e, a) in &self.schedule {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("alpha {a} at epoch {e} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn alpha_at(&self, epoch: usize) -> f64 {
        alpha_at(epoch, self)
    }

    /// Parses `"0:0.5,150:0.75,250:1"`.
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut schedule = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (e, a) = part
                .split_once(':')
                .ok_or_else(|| TrainError::Config(format!("alpha step {part:?} is not epoch:value")))?;
            let e = e
                .trim()
                .parse()
                .map_err(|_| TrainError::Config(format!("bad epoch in {part:?}")))?;
            let a = a
                .trim()
                .parse()
                .map_err(|_| TrainError::Config(format!("bad alpha in {part:?}")))?;
            schedule.push((e, a));
        }
        Self::new(schedule)
    }
}

/// Value of the last step whose epoch is `<= epoch`.
pub fn alpha_at(epoch: usize, weights: &LossWeights) -> f64 {
    weights
        .schedule
        .iter()
        .take_while(|(e, _)| *e <= epoch)
        .last()
        .map_or(1.0, |&(_, a)| a)
}

/// Cosine annealing with warm restarts every `period` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineScheduler {
    pub lr_max: f64,
    pub lr_min: f64,
    pub period: usize,
}

impl Default for CosineScheduler {
    fn default() -> Self {
        Self {
            lr_max: 1e-3,
            lr_min: 0.0,
            period: 50,
        }
    }
}

impl CosineScheduler {
    pub fn lr(&self, epoch: usize) -> f64 {
        let t = (epoch % self.period) as f64 / self.period as f64;
        self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + (PI * t).cos())
    }
}

/// Default-parameter [`CosineScheduler::lr`].
pub fn cosine_lr(epoch: usize) -> f64 {
    CosineScheduler::default().lr(epoch)
}

/// Multiplies the rate by `factor` once validation loss has failed to
/// strictly improve for more than `patience` consecutive epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
    pub best_val: f64,
    pub epochs_since_best: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64) -> Self {
        Self {
            lr,
            patience,
            factor,
            best_val: f64::INFINITY,
            epochs_since_best: 0,
        }
    }

    /// Records one epoch's validation loss and returns the rate to use next.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best_val {
            self.best_val = val_loss;
            self.epochs_since_best = 0;
        } else {
            self.epochs_since_best += 1;
            if self.epochs_since_best > self.patience {
                self.lr *= self.factor;
                self.epochs_since_best = 0;
            }
        }
        self.lr
    }
}

impl Default for PlateauScheduler {
    fn default() -> Self {
        Self::new(1e-3, 30, 0.5)
    }
}

/// Free-function form of [`PlateauScheduler::step`].
pub fn plateau_step(s: &mut PlateauScheduler, val_loss: f64) -> f64 {
    s.step(val_loss)
}

/// Learning-rate policy of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Plateau { patience: usize, factor: f64 },
    Cosine { lr_min: f64, period: usize },
    Constant,
}

impl LrSchedule {
    pub fn plateau() -> Self {
        LrSchedule::Plateau {
            patience: 30,
            factor: 0.5,
        }
    }

    pub fn cosine() -> Self {
        LrSchedule::Cosine {
            lr_min: 0.0,
            period: 50,
        }
    }
}

/// Running state of an [`LrSchedule`].
pub(crate) enum LrState {
    Plateau(PlateauScheduler),
    Cosine(CosineScheduler),
    Constant(f64),
}

impl LrState {
    pub(crate) fn new(s: &LrSchedule, lr: f64) -> Self {
        match *s {
            LrSchedule::Plateau { patience, factor } => {
                LrState::Plateau(PlateauScheduler::new(lr, patience, factor))
            }
            LrSchedule::Cosine { lr_min, period } => LrState::Cosine(CosineScheduler {
                lr_max: lr,
                lr_min,
                period,
            }),
            LrSchedule::Constant => LrState::Constant(lr),
        }
    }

    pub(crate) fn lr(&self, epoch: usize) -> f64 {
        match self {
            LrState::Plateau(p) => p.lr,
            LrState::Cosine(c) => c.lr(epoch),
            LrState::Constant(lr) => *lr,
        }
    }

    pub(crate) fn end_epoch(&mut self, val_loss: f64) {
        if let LrState::Plateau(p) = self {
            p.step(val_loss);
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffcore::ParamSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    /// `v = momentum * v + g; p -= lr * v` (plain SGD when momentum is 0).
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Sgd { momentum: 0.0 }
    }
}

impl OptimizerConfig {
    pub fn adam() -> Self {
        OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            OptimizerConfig::Sgd { momentum } => (0.0..1.0).contains(&momentum),
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid optimizer settings {self:?}"))
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            steps: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies the accumulated gradients. A frozen set is left untouched.
    pub fn step(&mut self, params: &mut ParamSet, lr: f64) {
        if params.is_frozen() {
            return;
        }
        self.steps += 1;
        let t = self.steps as i32;
        for (name, p) in params.iter_mut() {
            let n = p.grad.len();
            match self.config {
                OptimizerConfig::Sgd { momentum } => {
                    if momentum == 0.0 {
                        for (x, g) in p.value.data_mut().iter_mut().zip(&p.grad) {
                            *x -= lr * g;
                        }
                    } else {
                        let v = self.first.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
                        for ((x, g), v) in p.value.data_mut().iter_mut().zip(&p.grad).zip(v.iter_mut()) {
                            *v = momentum * *v + g;
                            *x -= lr * *v;
                        }
                    }
                }
                OptimizerConfig::Adam { beta1, beta2, eps } => {
                    let m = self.first.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
                    let v = self.second.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for (((x, g), m), v) in p
                        .value
                        .data_mut()
                        .iter_mut()
                        .zip(&p.grad)
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *x -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

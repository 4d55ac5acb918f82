// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::DataError;

/// Z-score transform fitted on training labels (population std).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelNormalizer {
    pub mu: f64,
    pub sigma: f64,
}

impl LabelNormalizer {
    pub fn fit(train: &[f64]) -> Result<Self, DataError> {
        if train.len() < 2 {
            return Err(DataError::Invalid(format!(
                "need at least 2 training labels, got {}",
                train.len()
            )));
        }
        if train.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite("training labels".into()));
        }
        let n = train.len() as f64;
        let mu = train.iter().sum::<f64>() / n;
        let var = train.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        let sigma = var.sqrt();
        if !(sigma > 0.0) {
            return Err(DataError::ZeroVariance);
        }
        Ok(Self { mu, sigma })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mu) / self.sigma
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.sigma + self.mu
    }
}

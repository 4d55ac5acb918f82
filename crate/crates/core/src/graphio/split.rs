// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

pub const MIN_SPLIT_IDS: usize = 10;

/// Disjoint train/validation/test partition of design ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn part(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = BTreeSet::new();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(id) {
                return Err(DataError::DuplicateKey(id.clone()));
            }
        }
        Ok(())
    }
}

/// Shuffles the sorted ids with a seeded ChaCha8 stream and cuts
/// `floor(0.75 n)` / `floor(0.10 n)` / remainder.
pub fn make_split(ids: &[String], seed: u64) -> Result<DatasetSplit, DataError> {
    make_split_percent(ids, seed, 75, 10)
}

/// [`make_split`] with other train and validation percentages.
pub fn make_split_percent(ids: &[String], seed: u64, train_pct: usize, val_pct: usize) -> Result<DatasetSplit, DataError> {
    if train_pct == 0 || val_pct == 0 || train_pct + val_pct >= 100 {
        return Err(DataError::Invalid(format!(
            "split percentages {train_pct}/{val_pct} leave no room for all three parts"
        )));
    }
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(DataError::DuplicateKey(w[0].clone()));
    }
    let n = sorted.len();
    if n < MIN_SPLIT_IDS {
        return Err(DataError::TooFewIds {
            min: MIN_SPLIT_IDS,
            got: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    let n_train = n * train_pct / 100;
    let n_val = n * val_pct / 100;
    let test = sorted.split_off(n_train + n_val);
    let val = sorted.split_off(n_train);
    Ok(DatasetSplit {
        seed,
        train: sorted,
        val,
        test,
    })
}

pub fn save_split(path: &Path, split: &DatasetSplit) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(split).expect("split serializes");
    fs::write(path, text + "\n").map_err(|e| DataError::io(path, e))
}

pub fn load_split(path: &Path) -> Result<DatasetSplit, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let split: DatasetSplit = serde_json::from_str(&text).map_err(|e| DataError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    split.validate()?;
    Ok(split)
}

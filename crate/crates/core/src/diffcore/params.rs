// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::ops::Index;

use sha2::{Digest, Sha256};

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::TensorError;

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Vec<f64>,
}

/// Named parameters, iterated in name order.
///
/// A frozen set binds onto tapes as constants and ignores gradient
/// accumulation, so its values can only change through explicit assignment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: BTreeMap<String, Param>,
    frozen: bool,
}

/// Tape handles for every parameter of a [`ParamSet`].
#[derive(Clone, Debug, Default)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl Index<&str> for Bound {
    type Output = Var;

    fn index(&self, name: &str) -> &Var {
        self.vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} is not bound"))
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a parameter; the gradient buffer is reset.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let grad = vec![0.0; value.numel()];
        self.params.insert(name.into(), Param { value, grad });
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn grad(&self, name: &str) -> Option<&[f64]> {
        self.params.get(name).map(|p| p.grad.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.numel()).sum()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    /// Records every parameter on `tape` as a leaf (constant when frozen).
    pub fn bind(&self, tape: &Tape) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(name, p)| {
                let v = if self.frozen {
                    tape.constant(p.value.clone())
                } else {
                    tape.leaf(p.value.clone())
                };
                (name.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    /// Records every parameter as a constant regardless of the frozen flag.
    pub fn bind_constants(&self, tape: &Tape) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(name, p)| (name.clone(), tape.constant(p.value.clone())))
            .collect();
        Bound { vars }
    }

    /// Adds the tape gradients of `bound` into the parameter gradient buffers.
    pub fn accumulate_grads(&mut self, tape: &Tape, bound: &Bound) -> Result<(), TensorError> {
        if self.frozen {
            return Ok(());
        }
        for (name, var) in bound.iter() {
            let p = self
                .params
                .get_mut(name)
                .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
            if let Some(g) = tape.grad(var) {
                for (a, d) in p.grad.iter_mut().zip(g.data()) {
                    *a += d;
                }
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// SHA-256 over names, shapes and little-endian payloads.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (name, p) in &self.params {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            for d in p.value.shape() {
                h.update((*d as u64).to_le_bytes());
            }
            h.update(p.value.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Central finite-difference verification of tape gradients.

use super::params::{Bound, ParamSet};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::TensorError;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

fn eval_scalar<F>(f: &F, x: &Tensor) -> Result<f64, TensorError>
where
    F: Fn(&Tape, Var) -> Result<Var, TensorError>,
{
    let tape = Tape::new();
    let v = tape.constant(x.clone());
    let out = f(&tape, v)?;
    let value = tape.item(out);
    value.ok_or_else(|| TensorError::Rank {
        op: "grad_check needs a scalar function",
        shape: tape.value(out).shape().to_vec(),
    })
}

/// Max over coordinates of `|analytic - central difference| / max(1, |analytic|)`
/// for the scalar function `f` at `x`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64, TensorError>
where
    F: Fn(&Tape, Var) -> Result<Var, TensorError>,
{
    let tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let out = f(&tape, xv)?;
    tape.backward(out)?;
    let analytic = tape.grad(xv).expect("leaf carries a gradient");

    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = eval_scalar(&f, &probe)?;
        probe.data_mut()[i] = orig - eps;
        let down = eval_scalar(&f, &probe)?;
        probe.data_mut()[i] = orig;
        worst = worst.max(rel_err(analytic.data()[i], (up - down) / (2.0 * eps)));
    }
    Ok(worst)
}

/// Same check over every scalar of a parameter set. `f` receives the tape and
/// the bound parameters and must return a scalar.
pub fn grad_check_params<F>(params: &ParamSet, eps: f64, f: F) -> Result<f64, TensorError>
where
    F: Fn(&Tape, &Bound) -> Result<Var, TensorError>,
{
    let mut work = params.clone();
    work.unfreeze();
    work.zero_grad();
    let tape = Tape::new();
    let bound = work.bind(&tape);
    let out = f(&tape, &bound)?;
    tape.backward(out)?;
    work.accumulate_grads(&tape, &bound)?;
    let analytic = work.clone();

    let eval = |ps: &ParamSet| -> Result<f64, TensorError> {
        let tape = Tape::new();
        let bound = ps.bind(&tape);
        let out = f(&tape, &bound)?;
        let v = tape.item(out);
        v.ok_or(TensorError::Rank {
            op: "grad_check_params needs a scalar function",
            shape: vec![],
        })
    };

    let names: Vec<String> = analytic.names().map(str::to_string).collect();
    let mut worst: f64 = 0.0;
    for name in names {
        let n = analytic.get(&name).map_or(0, Tensor::numel);
        for i in 0..n {
            let orig = work.get(&name).unwrap().data()[i];
            work.get_mut(&name).unwrap().data_mut()[i] = orig + eps;
            let up = eval(&work)?;
            work.get_mut(&name).unwrap().data_mut()[i] = orig - eps;
            let down = eval(&work)?;
            work.get_mut(&name).unwrap().data_mut()[i] = orig;
            let a = analytic.grad(&name).unwrap()[i];
            worst = worst.max(rel_err(a, (up - down) / (2.0 * eps)));
        }
    }
    Ok(worst)
}

// SPDX-License-Identifier: Apache-2.0

use crate::diffcore::{Tape, Var};

use super::TrainError;

fn same_shape(tape: &Tape, a: Var, b: Var, op: &str) -> Result<(usize, usize), TrainError> {
    let (sa, sb) = (tape.value(a).shape().to_vec(), tape.value(b).shape().to_vec());
    if sa != sb || sa.len() != 2 || sa[0] == 0 {
        return Err(TrainError::Config(format!("{op}: shapes {sa:?} and {sb:?}")));
    }
    Ok((sa[0], sa[1]))
}

/// Mean squared error between `B x 1` predictions and targets.
pub fn loss_sl(tape: &Tape, pred: Var, target: Var) -> Result<Var, TrainError> {
    same_shape(tape, pred, target, "loss_sl")?;
    Ok(tape.mse(pred, target)?)
}

/// Squared L2 distance between hidden rows, averaged over the batch.
///
/// The teacher side is detached here, so no gradient can reach it whatever
/// the caller passed in.
pub fn loss_kd(tape: &Tape, z_student: Var, z_teacher: Var) -> Result<Var, TrainError> {
    let (_, d) = same_shape(tape, z_student, z_teacher, "loss_kd")?;
    let zt = tape.detach(z_teacher);
    let per_element = tape.mse(z_student, zt)?;
    Ok(tape.scale(per_element, d as f64)?)
}

pub fn check_alpha(alpha: f64) -> Result<(), TrainError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(TrainError::Config(format!("alpha {alpha} outside [0, 1]")))
    }
}

/// `alpha * sl + (1 - alpha) * kd`.
pub fn loss_total(sl: f64, kd: f64, alpha: f64) -> Result<f64, TrainError> {
    check_alpha(alpha)?;
    Ok(alpha * sl + (1.0 - alpha) * kd)
}

/// Tape version of [`loss_total`].
pub fn combine_losses(tape: &Tape, sl: Var, kd: Var, alpha: f64) -> Result<Var, TrainError> {
    check_alpha(alpha)?;
    let a = tape.scale(sl, alpha)?;
    let b = tape.scale(kd, 1.0 - alpha)?;
    Ok(tape.add(a, b)?)
}

use super::{DenominatorMode, TrainError};
use crate::numerics::{Tape, Tensor, Var};

/// Predictions are clamped this far from 0 and 1 before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

/// Summed binary cross-entropy of probabilities `pred` (`n x 1`) against 0/1
/// `targets`. `None` (no predictions) contributes zero.
pub fn student_loss(tape: &mut Tape, pred: Option<Var>, targets: &[f64]) -> Result<Var, TrainError> {
    let Some(pred) = pred else {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    };
    let p = tape.clamp(pred, BCE_CLAMP, 1.0 - BCE_CLAMP);
    let r = tape.constant(Tensor::col_vector(targets));
    let not_r = tape.constant(Tensor::col_vector(&targets.iter().map(|r| 1.0 - r).collect::<Vec<_>>()));
    let log_p = tape.log(p);
    let one_minus = tape.affine(p, -1.0, 1.0);
    let log_q = tape.log(one_minus);
    let a = tape.mul(r, log_p)?;
    let b = tape.mul(not_r, log_q)?;
    let s = tape.add(a, b)?;
    let s = tape.sum_all(s);
    Ok(tape.scale(s, -1.0))
}

/// Summed squared error of predicted group rates.
pub fn group_loss(tape: &mut Tape, pred: Option<Var>, targets: &[f64]) -> Result<Var, TrainError> {
    let Some(pred) = pred else {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    };
    let y = tape.constant(Tensor::col_vector(targets));
    let diff = tape.sub(pred, y)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.sum_all(sq))
}

/// Contrastive loss between states `h` and their augmented counterparts
/// `h_aug` (both `n x d`, row `i` of each the same student).
///
/// Row `i` contributes `-log(exp(s_ii / tau) / sum_j exp(s_ij / tau))` with
/// cosine similarity `s`. In negatives-only mode the sum skips `j == i`, in
/// standard mode it includes it. Fewer than two rows give `None`.
pub fn contrastive_loss(
    tape: &mut Tape,
    h: Var,
    h_aug: Var,
    tau: f64,
    mode: DenominatorMode,
) -> Result<Option<Var>, TrainError> {
    let n = tape.shape(h)[0];
    if n < 2 {
        return Ok(None);
    }
    let sim = tape.cosine_similarity(h, h_aug)?;
    // Shift by the largest possible logit so every exponent is <= 0.
    let logits = tape.affine(sim, 1.0 / tau, -1.0 / tau);
    let exp = tape.exp(logits);
    let mut keep = Tensor::filled(n, n, 1.0);
    if mode == DenominatorMode::NegativesOnly {
        for i in 0..n {
            keep.set(i, i, 0.0);
        }
    }
    let keep = tape.constant(keep);
    let masked = tape.mul(exp, keep)?;
    let denom = tape.sum_rows(masked);
    let log_denom = tape.log(denom);
    let log_denom = tape.sum_all(log_denom);
    let eye = tape.constant(Tensor::identity(n));
    let diag = tape.mul(logits, eye)?;
    let diag = tape.sum_all(diag);
    Ok(Some(tape.sub(log_denom, diag)?))
}

/// `group + student / members + gamma * contrastive`, summed over groups.
pub fn total_loss(
    tape: &mut Tape,
    parts: &[(Var, Var, usize)],
    contrastive: Option<Var>,
    gamma: f64,
) -> Result<Var, TrainError> {
    let mut total = tape.constant(Tensor::scalar(0.0));
    for &(group, student, members) in parts {
        let scaled = tape.scale(student, 1.0 / members as f64);
        let term = tape.add(group, scaled)?;
        total = tape.add(total, term)?;
    }
    if let Some(cl) = contrastive {
        let weighted = tape.scale(cl, gamma);
        total = tape.add(total, weighted)?;
    }
    Ok(total)
}

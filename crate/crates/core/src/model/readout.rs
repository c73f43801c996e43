use super::{Bound, MlpIds, ModelError};
use crate::numerics::{Tape, Var};

/// `sigmoid(relu([h; e] W1 + b1) W2 + b2)`, one probability per row.
pub fn readout(tape: &mut Tape, p: &Bound, head: &MlpIds, h: Var, e: Var) -> Result<Var, ModelError> {
    let input = tape.concat_cols(&[h, e])?;
    let hidden = tape.matmul(input, p.var(head.w1))?;
    let hidden = tape.add_row(hidden, p.var(head.b1))?;
    let hidden = tape.relu(hidden);
    let logit = tape.matmul(hidden, p.var(head.w2))?;
    let logit = tape.add_row(logit, p.var(head.b2))?;
    Ok(tape.sigmoid(logit))
}

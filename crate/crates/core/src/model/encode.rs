//! Frame encodings of individual and group interactions.

use super::{Bound, GroupInput, ModelError};
use crate::numerics::{Tape, Tensor, Var};

/// Exercise embedding plus the mean embedding of its tagged concepts, one row
/// per interaction.
fn exercise_traits(
    tape: &mut Tape,
    p: &Bound,
    exercises: &[usize],
    concepts: &[Vec<usize>],
) -> Result<Var, ModelError> {
    let e = tape.embedding_lookup(p.var(p.ids.exercise_emb), exercises)?;
    let c = tape.segment_mean(p.var(p.ids.concept_emb), concepts.to_vec())?;
    Ok(tape.add(e, c)?)
}

/// Per-cell `(x, z)` for every `(frame, member)` of the group, each
/// `(frames * members) x d`.
///
/// Each interaction is encoded as `x = (e + c) W + b` and `z` = response
/// embedding; a cell is the mean over its interactions and zero when the
/// student was absent. With `zero_responses` the `z` block is all zeros.
pub fn encode_students(
    tape: &mut Tape,
    p: &Bound,
    input: &GroupInput,
    zero_responses: bool,
) -> Result<(Var, Var), ModelError> {
    let rows = &input.student;
    let traits = exercise_traits(tape, p, &rows.exercise, &rows.concepts)?;
    let x = tape.matmul(traits, p.var(p.ids.student_w))?;
    let x = tape.add_row(x, p.var(p.ids.student_b))?;
    let x_cells = tape.segment_mean(x, input.cells.clone())?;

    let z_cells = if zero_responses {
        let d = tape.shape(x_cells)[1];
        tape.constant(Tensor::zeros(input.num_cells(), d))
    } else {
        let responses: Vec<usize> = rows.outcome.iter().map(|&r| usize::from(r >= 0.5)).collect();
        let z = tape.embedding_lookup(p.var(p.ids.response_emb), &responses)?;
        tape.segment_mean(z, input.cells.clone())?
    };
    Ok((x_cells, z_cells))
}

/// Per-frame group `(x, z)`, each `frames x d`.
///
/// Interactions are encoded as `x = (e + c) W' + b'` with their own weights
/// and `z = y * scale + shift` for correct rate `y`; frames average over their
/// group interactions and are zero when there are none.
pub fn encode_group(
    tape: &mut Tape,
    p: &Bound,
    input: &GroupInput,
    zero_responses: bool,
) -> Result<(Var, Var), ModelError> {
    let rows = &input.group;
    if let Some(&bad) = rows.outcome.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(ModelError::InvalidRate(bad));
    }
    let traits = exercise_traits(tape, p, &rows.exercise, &rows.concepts)?;
    let x = tape.matmul(traits, p.var(p.ids.group_w))?;
    let x = tape.add_row(x, p.var(p.ids.group_b))?;
    let x_frames = tape.segment_mean(x, input.group_frames.clone())?;

    let z_frames = if zero_responses {
        let d = tape.shape(x_frames)[1];
        tape.constant(Tensor::zeros(input.frames, d))
    } else {
        let y = tape.constant(Tensor::col_vector(&rows.outcome));
        let z = tape.matmul(y, p.var(p.ids.rate_scale))?;
        let z = tape.add_row(z, p.var(p.ids.rate_bias))?;
        tape.segment_mean(z, input.group_frames.clone())?
    };
    Ok((x_frames, z_frames))
}

use super::readout::readout;
use super::{Bound, ModelError};
use crate::domain::QMatrix;
use crate::numerics::{Tape, Var};

/// Mean exercise embedding over the exercises tagged with each concept, one
/// row per concept.
pub fn concept_probes(tape: &mut Tape, p: &Bound, qmatrix: &QMatrix, concepts: &[usize]) -> Result<Var, ModelError> {
    let mut segments = Vec::with_capacity(concepts.len());
    for &c in concepts {
        if c >= qmatrix.num_concepts() {
            return Err(ModelError::UnknownConcept(c));
        }
        let ex = qmatrix.exercises_of(c);
        if ex.is_empty() {
            return Err(ModelError::NoExercisesForConcept(qmatrix.concepts[c].clone()));
        }
        segments.push(ex);
    }
    Ok(tape.segment_mean(p.var(p.ids.exercise_emb), segments)?)
}

/// Mastery of every probe for every state row: `out[c][t]` is the readout of
/// `states[t]` against probe `c`.
pub fn mastery_grid(
    tape: &mut Tape,
    p: &Bound,
    group_head: bool,
    states: Var,
    probes: Var,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let frames = tape.shape(states)[0];
    let num_probes = tape.shape(probes)[0];
    let head = if group_head {
        &p.ids.readout_group
    } else {
        &p.ids.readout_student
    };
    let mut out = Vec::with_capacity(num_probes);
    for c in 0..num_probes {
        let probe = tape.embedding_lookup(probes, &vec![c; frames])?;
        let y = readout(tape, p, head, states, probe)?;
        out.push(tape.value(y).data().to_vec());
    }
    Ok(out)
}

use crate::domain::{GroupSequence, QMatrix};

use super::ModelError;

/// One group's framed sequences flattened into index lists.
///
/// Cells are `(frame, member slot)` pairs laid out frame-major, so cell
/// `t * members + slot` holds that student's interactions in frame `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupInput {
    pub frames: usize,
    pub members: usize,
    pub student: InteractionRows,
    /// Student interaction rows per cell; empty means absent.
    pub cells: Vec<Vec<usize>>,
    pub group: InteractionRows,
    /// Group interaction rows per frame.
    pub group_frames: Vec<Vec<usize>>,
}

/// Column-wise storage of interactions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InteractionRows {
    pub exercise: Vec<usize>,
    pub concepts: Vec<Vec<usize>>,
    /// Binary response for students, correct rate for groups.
    pub outcome: Vec<f64>,
    /// Frame index of each row.
    pub frame: Vec<usize>,
    /// Member slot of each row (always 0 for group rows).
    pub slot: Vec<usize>,
}

impl InteractionRows {
    pub fn len(&self) -> usize {
        self.exercise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exercise.is_empty()
    }

    fn push(&mut self, exercise: usize, concepts: Vec<usize>, outcome: f64, frame: usize, slot: usize) {
        self.exercise.push(exercise);
        self.concepts.push(concepts);
        self.outcome.push(outcome);
        self.frame.push(frame);
        self.slot.push(slot);
    }
}

impl GroupInput {
    pub fn from_sequence(seq: &GroupSequence, members: usize, qmatrix: &QMatrix) -> Result<Self, ModelError> {
        let frames = seq.frames.len();
        let mut input = Self {
            frames,
            members,
            student: InteractionRows::default(),
            cells: vec![Vec::new(); frames * members],
            group: InteractionRows::default(),
            group_frames: vec![Vec::new(); frames],
        };
        for (t, frame) in seq.frames.iter().enumerate() {
            for (slot, list) in frame.students.iter().enumerate() {
                for it in list {
                    if it.exercise >= qmatrix.num_exercises() {
                        return Err(ModelError::UnknownExercise(it.exercise));
                    }
                    input.cells[t * members + slot].push(input.student.len());
                    input.student.push(
                        it.exercise,
                        it.concepts.clone(),
                        f64::from(it.response),
                        t,
                        slot,
                    );
                }
            }
            for it in &frame.group {
                if it.exercise >= qmatrix.num_exercises() {
                    return Err(ModelError::UnknownExercise(it.exercise));
                }
                if !(0.0..=1.0).contains(&it.correct_rate) {
                    return Err(ModelError::InvalidRate(it.correct_rate));
                }
                input.group_frames[t].push(input.group.len());
                input
                    .group
                    .push(it.exercise, it.concepts.clone(), it.correct_rate, t, 0);
            }
        }
        Ok(input)
    }

    pub fn num_cells(&self) -> usize {
        self.frames * self.members
    }

    pub fn nodes(&self) -> usize {
        self.members + 1
    }

    pub fn is_present(&self, t: usize, slot: usize) -> bool {
        !self.cells[t * self.members + slot].is_empty()
    }

    pub fn presence(&self) -> Vec<bool> {
        self.cells.iter().map(|c| !c.is_empty()).collect()
    }

    /// Copy with student outcomes replaced (group rates untouched).
    pub fn with_student_outcomes(&self, outcomes: Vec<f64>) -> Self {
        debug_assert_eq!(outcomes.len(), self.student.len());
        let mut out = self.clone();
        out.student.outcome = outcomes;
        out
    }
}

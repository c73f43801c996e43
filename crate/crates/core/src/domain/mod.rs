//! Students, groups, exercises and their time-framed interaction logs.
//!
//! The pipeline is `parse_logs` -> [`Dataset::build`] (which bins records into
//! frames and derives group correct rates) -> [`filter_dataset`].

mod archive;
mod filter;
mod frames;
mod ingest;

pub use archive::{read_archive, write_archive, DatasetSummary, ARCHIVE_MAGIC};
pub use filter::{filter_dataset, filter_records, MIN_GROUP_SIZE, MIN_STUDENT_RESPONSES};
pub use frames::{bin_time_frames, compute_group_rates};
pub use ingest::{
    load_qmatrix, parse_logs, parse_qmatrix, read_logs, write_logs, write_qmatrix, RawRecord, LOG_COLUMNS,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default frame span: one day.
pub const DEFAULT_SPAN_SECS: i64 = 86_400;
/// Minimum fraction of group members that must answer an exercise in a frame
/// for a group interaction to be emitted.
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column `{0}` in log header")]
    MissingColumn(String),
    #[error("invalid {column} at row {row}: {value:?}")]
    InvalidField {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("q-matrix: exercise `{0}` has no concept")]
    EmptyQRow(String),
    #[error("q-matrix: {0}")]
    QMatrix(String),
    #[error("exercise `{exercise}` at row {row}: concepts {found:?} disagree with q-matrix {expected:?}")]
    ConceptMismatch {
        row: usize,
        exercise: String,
        found: Vec<String>,
        expected: Vec<String>,
    },
    #[error("student `{student}` appears in groups `{first}` and `{second}`")]
    MultiGroupStudent {
        student: String,
        first: String,
        second: String,
    },
    #[error("frame span must be positive, got {0}")]
    InvalidSpan(i64),
    #[error("coverage threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("no interaction records")]
    NoRecords,
    #[error("dataset exhausted by filters")]
    Exhausted,
    #[error("correct rate {0} outside [0, 1]")]
    InvalidRate(f64),
    #[error("archive: {0}")]
    Archive(String),
}

/// Id tables. Every id is a dense index into the matching label vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityCatalog {
    pub students: Vec<String>,
    pub groups: Vec<String>,
    pub exercises: Vec<String>,
    pub concepts: Vec<String>,
    /// Group id -> member student ids, ascending.
    pub membership: Vec<Vec<usize>>,
}

impl EntityCatalog {
    pub fn num_students(&self) -> usize {
        self.students.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_exercises(&self) -> usize {
        self.exercises.len()
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn group_of(&self, student: usize) -> Option<usize> {
        self.membership.iter().position(|m| m.contains(&student))
    }

    pub fn student_id(&self, label: &str) -> Option<usize> {
        self.students.iter().position(|s| s == label)
    }

    pub fn group_id(&self, label: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == label)
    }

    pub fn concept_id(&self, label: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c == label)
    }
}

/// Binary exercise x concept tagging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QMatrix {
    pub exercises: Vec<String>,
    pub concepts: Vec<String>,
    /// Row-major `exercises x concepts` 0/1 entries.
    pub entries: Vec<Vec<u8>>,
}

impl QMatrix {
    pub fn new(
        exercises: Vec<String>,
        concepts: Vec<String>,
        entries: Vec<Vec<u8>>,
    ) -> Result<Self, DomainError> {
        if entries.len() != exercises.len() {
            return Err(DomainError::QMatrix(format!(
                "{} rows for {} exercises",
                entries.len(),
                exercises.len()
            )));
        }
        for (label, row) in exercises.iter().zip(&entries) {
            if row.len() != concepts.len() {
                return Err(DomainError::QMatrix(format!(
                    "row `{label}` has {} entries, expected {}",
                    row.len(),
                    concepts.len()
                )));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(DomainError::QMatrix(format!("row `{label}` is not binary")));
            }
            if row.iter().all(|&v| v == 0) {
                return Err(DomainError::EmptyQRow(label.clone()));
            }
        }
        Ok(Self {
            exercises,
            concepts,
            entries,
        })
    }

    pub fn num_exercises(&self) -> usize {
        self.exercises.len()
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    /// Concept ids tagged on `exercise`, ascending.
    pub fn concepts_of(&self, exercise: usize) -> Vec<usize> {
        self.entries[exercise]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(c, _)| c)
            .collect()
    }

    /// Exercise ids tagged with `concept`.
    pub fn exercises_of(&self, concept: usize) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, row)| row[concept] == 1)
            .map(|(e, _)| e)
            .collect()
    }

    pub fn exercise_index(&self, label: &str) -> Option<usize> {
        self.exercises.iter().position(|e| e == label)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentInteraction {
    pub exercise: usize,
    pub concepts: Vec<usize>,
    pub response: u8,
    pub timestamp: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupInteraction {
    pub exercise: usize,
    pub concepts: Vec<usize>,
    pub correct_rate: f64,
    pub timestamp: i64,
}

/// One time frame of one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Half-open `[start, end)` in seconds.
    pub start: i64,
    pub end: i64,
    /// Per member slot (the order of the group's membership list). An empty
    /// list means the student was absent in this frame.
    pub students: Vec<Vec<StudentInteraction>>,
    pub group: Vec<GroupInteraction>,
}

impl Frame {
    pub fn is_present(&self, slot: usize) -> bool {
        !self.students[slot].is_empty()
    }

    pub fn num_present(&self) -> usize {
        self.students.iter().filter(|s| !s.is_empty()).count()
    }

    pub fn num_responses(&self) -> usize {
        self.students.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSequence {
    pub group: usize,
    /// Frame `t` (1-based in the literature) lives at index `t - 1`.
    pub frames: Vec<Frame>,
}

impl GroupSequence {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramedSequences {
    /// Indexed by group id.
    pub groups: Vec<GroupSequence>,
}

impl FramedSequences {
    /// `F_t` for `student` (slot in `group`), frame index `t` 0-based.
    pub fn student_frame(&self, group: usize, slot: usize, t: usize) -> &[StudentInteraction] {
        &self.groups[group].frames[t].students[slot]
    }

    /// `H_t` for `group`, frame index `t` 0-based.
    pub fn group_frame(&self, group: usize, t: usize) -> &[GroupInteraction] {
        &self.groups[group].frames[t].group
    }

    pub fn total_frames(&self) -> usize {
        self.groups.iter().map(GroupSequence::num_frames).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub span_secs: i64,
    pub coverage_threshold: f64,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self {
            span_secs: DEFAULT_SPAN_SECS,
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub catalog: EntityCatalog,
    pub qmatrix: QMatrix,
    pub sequences: FramedSequences,
    pub params: BuildParams,
}

/// A record with catalog ids resolved.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct InternedRecord {
    pub timestamp: i64,
    pub student: usize,
    pub exercise: usize,
    pub response: u8,
}

impl Dataset {
    /// Interns ids, bins records into frames and derives group rates.
    ///
    /// Student and group ids are assigned in label order so the result does
    /// not depend on record order. Exercises keep the q-matrix order; exercises
    /// missing from it are appended (sorted) with the concepts listed in the
    /// logs, and unknown concepts are appended likewise.
    pub fn build(
        records: &[RawRecord],
        qmatrix: &QMatrix,
        params: BuildParams,
    ) -> Result<Self, DomainError> {
        if records.is_empty() {
            return Err(DomainError::NoRecords);
        }
        if params.span_secs <= 0 {
            return Err(DomainError::InvalidSpan(params.span_secs));
        }
        if !(params.coverage_threshold > 0.0 && params.coverage_threshold <= 1.0) {
            return Err(DomainError::InvalidThreshold(params.coverage_threshold));
        }

        let mut qmatrix = qmatrix.clone();
        let mut extra_concepts = BTreeSet::new();
        let mut extra_exercises: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in records {
            if qmatrix.exercise_index(&r.exercise).is_none() {
                let set: BTreeSet<&str> = r.concepts.iter().map(String::as_str).collect();
                if let Some(prev) = extra_exercises.get(r.exercise.as_str()) {
                    if *prev != set {
                        return Err(DomainError::ConceptMismatch {
                            row: r.row,
                            exercise: r.exercise.clone(),
                            found: r.concepts.clone(),
                            expected: prev.iter().map(|s| s.to_string()).collect(),
                        });
                    }
                }
                extra_exercises.insert(&r.exercise, set);
            }
            for c in &r.concepts {
                if !qmatrix.concepts.contains(c) {
                    extra_concepts.insert(c.as_str());
                }
            }
        }
        for c in extra_concepts {
            qmatrix.concepts.push(c.to_string());
            qmatrix.entries.iter_mut().for_each(|row| row.push(0));
        }
        for (ex, concepts) in &extra_exercises {
            if concepts.is_empty() {
                return Err(DomainError::EmptyQRow(ex.to_string()));
            }
            let row = qmatrix
                .concepts
                .iter()
                .map(|c| u8::from(concepts.contains(c.as_str())))
                .collect();
            qmatrix.exercises.push(ex.to_string());
            qmatrix.entries.push(row);
        }

        // Concept lists in logs must agree with the q-matrix.
        for r in records {
            let e = qmatrix.exercise_index(&r.exercise).expect("registered above");
            let expected = qmatrix.concepts_of(e);
            let mut found: Vec<usize> = r
                .concepts
                .iter()
                .map(|c| qmatrix.concepts.iter().position(|q| q == c).expect("registered"))
                .collect();
            found.sort_unstable();
            found.dedup();
            if !r.concepts.is_empty() && found != expected {
                return Err(DomainError::ConceptMismatch {
                    row: r.row,
                    exercise: r.exercise.clone(),
                    found: r.concepts.clone(),
                    expected: expected
                        .iter()
                        .map(|&c| qmatrix.concepts[c].clone())
                        .collect(),
                });
            }
        }

        let students: Vec<String> = records
            .iter()
            .map(|r| r.student.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let groups: Vec<String> = records
            .iter()
            .map(|r| r.group.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut student_group: BTreeMap<&str, &str> = BTreeMap::new();
        for r in records {
            match student_group.get(r.student.as_str()) {
                Some(&g) if g != r.group => {
                    let (first, second) = if g < r.group.as_str() {
                        (g, r.group.as_str())
                    } else {
                        (r.group.as_str(), g)
                    };
                    return Err(DomainError::MultiGroupStudent {
                        student: r.student.clone(),
                        first: first.to_string(),
                        second: second.to_string(),
                    });
                }
                _ => {
                    student_group.insert(&r.student, &r.group);
                }
            }
        }
        let mut membership = vec![Vec::new(); groups.len()];
        for (s, label) in students.iter().enumerate() {
            let g = groups
                .binary_search(&student_group[label.as_str()].to_string())
                .expect("group interned");
            membership[g].push(s);
        }

        let catalog = EntityCatalog {
            students,
            groups,
            exercises: qmatrix.exercises.clone(),
            concepts: qmatrix.concepts.clone(),
            membership,
        };
        let interned: Vec<InternedRecord> = records
            .iter()
            .map(|r| InternedRecord {
                timestamp: r.timestamp,
                student: catalog.students.binary_search(&r.student).expect("interned"),
                exercise: qmatrix.exercise_index(&r.exercise).expect("interned"),
                response: r.correct,
            })
            .collect();

        let mut sequences = bin_time_frames(&catalog, &qmatrix, &interned, params.span_secs)?;
        compute_group_rates(&mut sequences, params.coverage_threshold)?;
        Ok(Self {
            catalog,
            qmatrix,
            sequences,
            params,
        })
    }

    /// Flattens the student interactions back into raw records.
    pub fn to_records(&self) -> Vec<RawRecord> {
        let mut out = Vec::new();
        for seq in &self.sequences.groups {
            let members = &self.catalog.membership[seq.group];
            for frame in &seq.frames {
                for (slot, list) in frame.students.iter().enumerate() {
                    for it in list {
                        out.push(RawRecord {
                            row: out.len() + 1,
                            student: self.catalog.students[members[slot]].clone(),
                            group: self.catalog.groups[seq.group].clone(),
                            exercise: self.catalog.exercises[it.exercise].clone(),
                            concepts: it
                                .concepts
                                .iter()
                                .map(|&c| self.catalog.concepts[c].clone())
                                .collect(),
                            timestamp: it.timestamp,
                            correct: it.response,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn num_student_responses(&self) -> usize {
        self.sequences
            .groups
            .iter()
            .flat_map(|g| &g.frames)
            .map(Frame::num_responses)
            .sum()
    }

    pub fn num_group_interactions(&self) -> usize {
        self.sequences
            .groups
            .iter()
            .flat_map(|g| &g.frames)
            .map(|f| f.group.len())
            .sum()
    }

    /// Copy restricted to `groups` (ids re-densified in the given order).
    pub fn subset(&self, groups: &[usize]) -> Self {
        let mut catalog = EntityCatalog {
            students: Vec::new(),
            groups: Vec::new(),
            exercises: self.catalog.exercises.clone(),
            concepts: self.catalog.concepts.clone(),
            membership: Vec::new(),
        };
        let mut seqs = Vec::new();
        for (new_g, &g) in groups.iter().enumerate() {
            catalog.groups.push(self.catalog.groups[g].clone());
            let mut members = Vec::new();
            for &s in &self.catalog.membership[g] {
                members.push(catalog.students.len());
                catalog.students.push(self.catalog.students[s].clone());
            }
            catalog.membership.push(members);
            let mut seq = self.sequences.groups[g].clone();
            seq.group = new_g;
            seqs.push(seq);
        }
        Self {
            catalog,
            qmatrix: self.qmatrix.clone(),
            sequences: FramedSequences { groups: seqs },
            params: self.params,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(student: &str, group: &str, ex: &str, concepts: &[&str], ts: i64, correct: u8) -> RawRecord {
        RawRecord {
            row: 0,
            student: student.into(),
            group: group.into(),
            exercise: ex.into(),
            concepts: concepts.iter().map(|c| c.to_string()).collect(),
            timestamp: ts,
            correct,
        }
    }

    fn q() -> QMatrix {
        QMatrix::new(
            vec!["e0".into(), "e1".into()],
            vec!["c0".into(), "c1".into()],
            vec![vec![1, 0], vec![1, 1]],
        )
        .unwrap()
    }

    #[test]
    fn qmatrix_lookups() {
        let q = QMatrix::new(
            vec!["e".into()],
            vec!["c0".into(), "c1".into(), "c2".into()],
            vec![vec![1, 0, 1]],
        )
        .unwrap();
        assert_eq!(q.concepts_of(0), vec![0, 2]);
        assert_eq!(q.exercises_of(2), vec![0]);
    }

    #[test]
    fn qmatrix_rejects_zero_row() {
        let err = QMatrix::new(vec!["e7".into()], vec!["c".into()], vec![vec![0]]).unwrap_err();
        assert!(matches!(err, DomainError::EmptyQRow(ref e) if e == "e7"));
    }

    #[test]
    fn build_auto_registers_unknown_exercise_and_concept() {
        let records = vec![rec("s1", "g1", "e9", &["c5"], 0, 1)];
        let d = Dataset::build(&records, &q(), BuildParams::default()).unwrap();
        assert_eq!(d.catalog.exercises, vec!["e0", "e1", "e9"]);
        assert_eq!(d.catalog.concepts, vec!["c0", "c1", "c5"]);
        assert_eq!(d.qmatrix.concepts_of(2), vec![2]);
        assert_eq!(d.qmatrix.concepts_of(1), vec![0, 1]);
    }

    #[test]
    fn build_rejects_concept_mismatch() {
        let records = vec![rec("s1", "g1", "e1", &["c0"], 0, 1)];
        let err = Dataset::build(&records, &q(), BuildParams::default()).unwrap_err();
        assert!(matches!(err, DomainError::ConceptMismatch { .. }), "{err}");
    }

    #[test]
    fn build_rejects_multi_group_student() {
        let records = vec![
            rec("s1", "g1", "e0", &["c0"], 0, 1),
            rec("s1", "g2", "e0", &["c0"], 5, 1),
        ];
        let err = Dataset::build(&records, &q(), BuildParams::default()).unwrap_err();
        assert!(matches!(err, DomainError::MultiGroupStudent { .. }));
    }

    #[test]
    fn interactions_carry_qmatrix_concepts() {
        let records = vec![
            rec("s1", "g1", "e1", &["c1", "c0"], 0, 1),
            rec("s2", "g1", "e1", &[], 10, 0),
        ];
        let d = Dataset::build(&records, &q(), BuildParams::default()).unwrap();
        for f in &d.sequences.groups[0].frames {
            for list in &f.students {
                for it in list {
                    assert_eq!(it.concepts, d.qmatrix.concepts_of(it.exercise));
                }
            }
        }
    }

    #[test]
    fn subset_redensifies() {
        let records = vec![
            rec("a", "g1", "e0", &["c0"], 0, 1),
            rec("b", "g2", "e0", &["c0"], 0, 0),
        ];
        let d = Dataset::build(&records, &q(), BuildParams::default()).unwrap();
        let s = d.subset(&[1]);
        assert_eq!(s.catalog.groups, vec!["g2"]);
        assert_eq!(s.catalog.students, vec!["b"]);
        assert_eq!(s.catalog.membership, vec![vec![0]]);
        assert_eq!(s.sequences.groups[0].group, 0);
    }
}

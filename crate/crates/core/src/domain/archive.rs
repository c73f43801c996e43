//! Dataset archives: the line `HKT-DATASET v1` followed by a JSON document
//! holding the catalog, q-matrix, build parameters and framed sequences.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Dataset, DomainError};

pub const ARCHIVE_MAGIC: &str = "HKT-DATASET v1";

pub fn write_archive<W: Write>(mut w: W, dataset: &Dataset) -> Result<(), DomainError> {
    let io = |source| DomainError::Io {
        path: "<archive>".into(),
        source,
    };
    writeln!(w, "{ARCHIVE_MAGIC}").map_err(io)?;
    serde_json::to_writer(&mut w, dataset).map_err(|e| DomainError::Archive(e.to_string()))?;
    writeln!(w).map_err(io)?;
    Ok(())
}

pub fn read_archive<R: Read>(r: R) -> Result<Dataset, DomainError> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|source| DomainError::Io {
            path: "<archive>".into(),
            source,
        })?;
    if header.trim_end() != ARCHIVE_MAGIC {
        return Err(DomainError::Archive(format!(
            "expected header `{ARCHIVE_MAGIC}`, found {:?}",
            header.trim_end()
        )));
    }
    serde_json::from_reader(reader).map_err(|e| DomainError::Archive(e.to_string()))
}

/// The dataset statistics reported after ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub students: usize,
    pub groups: usize,
    /// Distinct exercises with at least one student response.
    pub exercises: usize,
    /// Distinct concepts tagged on those exercises.
    pub concepts: usize,
    pub avg_group_size: f64,
    pub avg_responses_per_student: f64,
    /// Group-exercise interactions per group.
    pub avg_responses_per_group: f64,
    /// Student responses per (group, frame).
    pub avg_responses_per_frame: f64,
}

impl DatasetSummary {
    pub fn of(d: &Dataset) -> Self {
        let mut exercises = vec![false; d.catalog.num_exercises()];
        for seq in &d.sequences.groups {
            for f in &seq.frames {
                for it in f.students.iter().flatten() {
                    exercises[it.exercise] = true;
                }
            }
        }
        let mut concepts = vec![false; d.catalog.num_concepts()];
        for (e, _) in exercises.iter().enumerate().filter(|(_, &used)| used) {
            for c in d.qmatrix.concepts_of(e) {
                concepts[c] = true;
            }
        }
        let students = d.catalog.num_students();
        let groups = d.catalog.num_groups();
        let responses = d.num_student_responses() as f64;
        let frames = d.sequences.total_frames();
        let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
        Self {
            students,
            groups,
            exercises: exercises.iter().filter(|&&b| b).count(),
            concepts: concepts.iter().filter(|&&b| b).count(),
            avg_group_size: ratio(students as f64, groups),
            avg_responses_per_student: ratio(responses, students),
            avg_responses_per_group: ratio(d.num_group_interactions() as f64, groups),
            avg_responses_per_frame: ratio(responses, frames),
        }
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# students\t{}", self.students)?;
        writeln!(f, "# groups\t{}", self.groups)?;
        writeln!(f, "# exercises\t{}", self.exercises)?;
        writeln!(f, "# concepts\t{}", self.concepts)?;
        writeln!(f, "Avg. group size\t{:.2}", self.avg_group_size)?;
        writeln!(f, "Avg. responses per student\t{:.2}", self.avg_responses_per_student)?;
        writeln!(f, "Avg. responses per group\t{:.2}", self.avg_responses_per_group)?;
        write!(f, "Avg. responses per time frame\t{:.2}", self.avg_responses_per_frame)
    }
}

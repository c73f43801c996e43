use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{DomainError, QMatrix};

pub const LOG_COLUMNS: [&str; 6] = [
    "student_id",
    "group_id",
    "exercise_id",
    "concept_ids",
    "timestamp",
    "correct",
];

/// One row of an interaction log, ids still as labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    /// 1-based data row (the header is not counted).
    pub row: usize,
    pub student: String,
    pub group: String,
    pub exercise: String,
    pub concepts: Vec<String>,
    pub timestamp: i64,
    pub correct: u8,
}

pub fn parse_logs(path: impl AsRef<Path>) -> Result<Vec<RawRecord>, DomainError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DomainError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_logs(file)
}

/// Parses `student_id,group_id,exercise_id,concept_ids,timestamp,correct`
/// rows; `concept_ids` is `|`-separated. Columns may come in any order.
pub fn read_logs<R: Read>(reader: R) -> Result<Vec<RawRecord>, DomainError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if is_eof(&e) => return Ok(Vec::new()),
        Err(e) => {
            return Err(DomainError::MalformedRow {
                row: 0,
                message: e.to_string(),
            })
        }
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(LOG_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DomainError::MissingColumn(name.to_string()))?;
    }

    let mut out = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let row = i + 1;
        let record = result.map_err(|e| DomainError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let field = |k: usize| -> Result<&str, DomainError> {
            record.get(idx[k]).ok_or_else(|| DomainError::MalformedRow {
                row,
                message: format!("missing column `{}`", LOG_COLUMNS[k]),
            })
        };
        let nonempty = |k: usize, column: &'static str| -> Result<String, DomainError> {
            let v = field(k)?;
            if v.is_empty() {
                return Err(DomainError::InvalidField {
                    row,
                    column,
                    value: v.to_string(),
                });
            }
            Ok(v.to_string())
        };
        let student = nonempty(0, "student_id")?;
        let group = nonempty(1, "group_id")?;
        let exercise = nonempty(2, "exercise_id")?;
        let concepts = field(3)?
            .split('|')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(String::from)
            .collect();
        let ts_raw = field(4)?;
        let timestamp = ts_raw.parse::<i64>().map_err(|_| DomainError::InvalidField {
            row,
            column: "timestamp",
            value: ts_raw.to_string(),
        })?;
        let correct = match field(5)? {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(DomainError::InvalidField {
                    row,
                    column: "response",
                    value: other.to_string(),
                })
            }
        };
        out.push(RawRecord {
            row,
            student,
            group,
            exercise,
            concepts,
            timestamp,
            correct,
        });
    }
    Ok(out)
}

/// Writes records in the column order of [`LOG_COLUMNS`].
pub fn write_logs<W: Write>(writer: W, records: &[RawRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LOG_COLUMNS)?;
    for r in records {
        w.write_record([
            r.student.as_str(),
            &r.group,
            &r.exercise,
            &r.concepts.join("|"),
            &r.timestamp.to_string(),
            &r.correct.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_qmatrix<W: Write>(writer: W, q: &QMatrix) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(std::iter::once("exercise_id").chain(q.concepts.iter().map(String::as_str)))?;
    for (label, row) in q.exercises.iter().zip(&q.entries) {
        w.write_record(std::iter::once(label.clone()).chain(row.iter().map(u8::to_string)))?;
    }
    w.flush()
}

fn is_eof(e: &csv::Error) -> bool {
    matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof)
}

pub fn load_qmatrix(path: impl AsRef<Path>) -> Result<QMatrix, DomainError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DomainError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_qmatrix(file)
}

/// Header `exercise_id,<concept ids...>`, then one `<exercise id>,0,1,...`
/// row per exercise.
pub fn parse_qmatrix<R: Read>(reader: R) -> Result<QMatrix, DomainError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DomainError::QMatrix(e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(DomainError::QMatrix(
            "header must name the exercise column and at least one concept".into(),
        ));
    }
    let concepts: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut exercises = Vec::new();
    let mut entries = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let record = result.map_err(|e| DomainError::QMatrix(format!("row {}: {e}", i + 1)))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let label = record[0].to_string();
        if record.len() != concepts.len() + 1 {
            return Err(DomainError::QMatrix(format!(
                "row `{label}` has {} entries, expected {}",
                record.len() - 1,
                concepts.len()
            )));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|v| match v {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(DomainError::QMatrix(format!(
                    "row `{label}` has non-binary entry {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if exercises.contains(&label) {
            return Err(DomainError::QMatrix(format!("duplicate exercise `{label}`")));
        }
        exercises.push(label);
        entries.push(row);
    }
    QMatrix::new(exercises, concepts, entries)
}

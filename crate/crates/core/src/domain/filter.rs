use std::collections::{BTreeMap, BTreeSet};

use super::{Dataset, DomainError, RawRecord};

pub const MIN_STUDENT_RESPONSES: usize = 3;
pub const MIN_GROUP_SIZE: usize = 3;

/// Drops students with fewer than three responses, then groups with fewer
/// than three remaining students, repeating until nothing changes.
pub fn filter_records(mut records: Vec<RawRecord>) -> Vec<RawRecord> {
    loop {
        let before = records.len();
        let mut responses: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &records {
            *responses.entry(&r.student).or_default() += 1;
        }
        let keep_students: BTreeSet<String> = responses
            .into_iter()
            .filter(|&(_, n)| n >= MIN_STUDENT_RESPONSES)
            .map(|(s, _)| s.to_string())
            .collect();
        records.retain(|r| keep_students.contains(&r.student));

        let mut members: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in &records {
            members.entry(&r.group).or_default().insert(&r.student);
        }
        let keep_groups: BTreeSet<String> = members
            .into_iter()
            .filter(|(_, m)| m.len() >= MIN_GROUP_SIZE)
            .map(|(g, _)| g.to_string())
            .collect();
        records.retain(|r| keep_groups.contains(&r.group));

        if records.len() == before {
            return records;
        }
    }
}

/// Applies [`filter_records`] and rebuilds the dataset with dense ids.
pub fn filter_dataset(dataset: &Dataset) -> Result<Dataset, DomainError> {
    let records = filter_records(dataset.to_records());
    if records.is_empty() {
        return Err(DomainError::Exhausted);
    }
    Dataset::build(&records, &dataset.qmatrix, dataset.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BuildParams, QMatrix};

    fn rec(student: &str, group: &str, ts: i64) -> RawRecord {
        RawRecord {
            row: 0,
            student: student.into(),
            group: group.into(),
            exercise: "e".into(),
            concepts: vec!["c".into()],
            timestamp: ts,
            correct: 1,
        }
    }

    fn responses(student: &str, group: &str, n: usize) -> Vec<RawRecord> {
        (0..n).map(|i| rec(student, group, i as i64)).collect()
    }

    fn dataset(records: &[RawRecord]) -> Dataset {
        let q = QMatrix::new(vec!["e".into()], vec!["c".into()], vec![vec![1]]).unwrap();
        Dataset::build(records, &q, BuildParams::default()).unwrap()
    }

    #[test]
    fn small_group_removed() {
        let mut recs = responses("a", "g1", 3);
        recs.extend(responses("b", "g1", 3));
        for s in ["c", "d", "e"] {
            recs.extend(responses(s, "g2", 3));
        }
        let d = filter_dataset(&dataset(&recs)).unwrap();
        assert_eq!(d.catalog.groups, vec!["g2"]);
        assert_eq!(d.catalog.students, vec!["c", "d", "e"]);
    }

    #[test]
    fn sparse_student_removed_group_kept() {
        let mut recs = Vec::new();
        for s in ["a", "b", "c", "d"] {
            recs.extend(responses(s, "g", 3));
        }
        recs.extend(responses("x", "g", 2));
        let d = filter_dataset(&dataset(&recs)).unwrap();
        assert_eq!(d.catalog.students, vec!["a", "b", "c", "d"]);
        assert_eq!(d.catalog.membership, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn cascade_reaches_fixpoint() {
        // Dropping `x` leaves g with two students, which then drops the group.
        let mut recs = responses("a", "g", 3);
        recs.extend(responses("b", "g", 3));
        recs.extend(responses("x", "g", 1));
        for s in ["p", "q", "r"] {
            recs.extend(responses(s, "h", 4));
        }
        let out = filter_records(recs);
        assert!(out.iter().all(|r| r.group == "h"));
    }

    #[test]
    fn exhausted_is_an_error() {
        let recs = responses("a", "g", 5);
        let err = filter_dataset(&dataset(&recs)).unwrap_err();
        assert_eq!(err.to_string(), "dataset exhausted by filters");
    }

    #[test]
    fn idempotent() {
        let mut recs = Vec::new();
        for (i, s) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            recs.extend(responses(s, if i < 3 { "g" } else { "h" }, 2 + i));
        }
        let once = filter_records(recs);
        let twice = filter_records(once.clone());
        assert_eq!(once, twice);
    }
}

use std::collections::BTreeMap;

use log::warn;

use super::{
    DomainError, EntityCatalog, Frame, FramedSequences, GroupInteraction, GroupSequence,
    InternedRecord, QMatrix, StudentInteraction,
};

/// Buckets records into frames of `span` seconds.
///
/// Each group gets its own grid anchored at the earliest timestamp of any of
/// its members: record `t` lands in grid cell `floor((t - t_min) / span)`.
/// Cells with no interaction at all are dropped and the rest renumbered
/// contiguously, so frame indices of a group run `0..T`.
pub fn bin_time_frames(
    catalog: &EntityCatalog,
    qmatrix: &QMatrix,
    records: &[InternedRecord],
    span: i64,
) -> Result<FramedSequences, DomainError> {
    if span <= 0 {
        return Err(DomainError::InvalidSpan(span));
    }
    if records.is_empty() {
        return Err(DomainError::NoRecords);
    }
    let first_ts = records[0].timestamp;
    if records.len() > 1 && records.iter().all(|r| r.timestamp == first_ts) {
        warn!("all {} records share timestamp {first_ts}; producing a single frame", records.len());
    }

    let mut slot_of = vec![(usize::MAX, usize::MAX); catalog.num_students()];
    for (g, members) in catalog.membership.iter().enumerate() {
        for (slot, &s) in members.iter().enumerate() {
            slot_of[s] = (g, slot);
        }
    }
    let mut by_group: Vec<Vec<&InternedRecord>> = vec![Vec::new(); catalog.num_groups()];
    for r in records {
        by_group[slot_of[r.student].0].push(r);
    }

    let mut groups = Vec::with_capacity(catalog.num_groups());
    for (g, mut recs) in by_group.into_iter().enumerate() {
        recs.sort();
        let members = catalog.membership[g].len();
        let Some(t_min) = recs.iter().map(|r| r.timestamp).min() else {
            groups.push(GroupSequence {
                group: g,
                frames: Vec::new(),
            });
            continue;
        };
        let mut cells: BTreeMap<i64, Frame> = BTreeMap::new();
        for r in recs {
            let cell = (r.timestamp - t_min).div_euclid(span);
            let frame = cells.entry(cell).or_insert_with(|| Frame {
                start: t_min + cell * span,
                end: t_min + (cell + 1) * span,
                students: vec![Vec::new(); members],
                group: Vec::new(),
            });
            frame.students[slot_of[r.student].1].push(StudentInteraction {
                exercise: r.exercise,
                concepts: qmatrix.concepts_of(r.exercise),
                response: r.response,
                timestamp: r.timestamp,
            });
        }
        groups.push(GroupSequence {
            group: g,
            frames: cells.into_values().collect(),
        });
    }
    Ok(FramedSequences { groups })
}

/// Fills each frame's group interactions.
///
/// An exercise yields a group interaction when the fraction of group members
/// who answered it in the frame is at least `coverage_threshold`. The correct
/// rate is the mean over those members of each member's mean response on the
/// exercise within the frame.
pub fn compute_group_rates(
    sequences: &mut FramedSequences,
    coverage_threshold: f64,
) -> Result<(), DomainError> {
    if !(coverage_threshold > 0.0 && coverage_threshold <= 1.0) {
        return Err(DomainError::InvalidThreshold(coverage_threshold));
    }
    for seq in &mut sequences.groups {
        for frame in &mut seq.frames {
            let members = frame.students.len();
            // exercise -> (member means, earliest timestamp, concepts)
            let mut per_exercise: BTreeMap<usize, (Vec<f64>, i64, Vec<usize>)> = BTreeMap::new();
            for list in &frame.students {
                let mut mine: BTreeMap<usize, (u32, u32, i64)> = BTreeMap::new();
                for it in list {
                    let e = mine.entry(it.exercise).or_insert((0, 0, it.timestamp));
                    e.0 += u32::from(it.response);
                    e.1 += 1;
                    e.2 = e.2.min(it.timestamp);
                }
                for (ex, (correct, total, ts)) in mine {
                    let concepts = list
                        .iter()
                        .find(|it| it.exercise == ex)
                        .map(|it| it.concepts.clone())
                        .unwrap_or_default();
                    let entry = per_exercise
                        .entry(ex)
                        .or_insert_with(|| (Vec::new(), ts, concepts));
                    entry.0.push(f64::from(correct) / f64::from(total));
                    entry.1 = entry.1.min(ts);
                }
            }
            frame.group = per_exercise
                .into_iter()
                .filter(|(_, (means, _, _))| {
                    means.len() as f64 / members as f64 >= coverage_threshold
                })
                .map(|(exercise, (means, timestamp, concepts))| GroupInteraction {
                    exercise,
                    concepts,
                    correct_rate: means.iter().sum::<f64>() / means.len() as f64,
                    timestamp,
                })
                .collect();
        }
    }
    Ok(())
}

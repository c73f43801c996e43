#![allow(dead_code)]

use hkt::domain::{Frame, GroupInteraction, GroupSequence, QMatrix, StudentInteraction};
use hkt::model::{GroupInput, Model, ModelConfig};

/// Four exercises over three concepts; concept `k2` tags nothing.
pub fn qmatrix() -> QMatrix {
    QMatrix::new(
        vec!["e0".into(), "e1".into(), "e2".into(), "e3".into()],
        vec!["k0".into(), "k1".into(), "k2".into()],
        vec![vec![1, 0, 0], vec![0, 1, 0], vec![1, 1, 0], vec![0, 1, 0]],
    )
    .unwrap()
}

/// `students[t][slot]` lists `(exercise, response)`; `group[t]` lists
/// `(exercise, correct_rate)`.
pub fn sequence(students: &[Vec<Vec<(usize, u8)>>], group: &[Vec<(usize, f64)>]) -> GroupSequence {
    let q = qmatrix();
    let tags = |e: usize| if e < q.num_exercises() { q.concepts_of(e) } else { vec![0] };
    let frames = students
        .iter()
        .zip(group)
        .enumerate()
        .map(|(t, (slots, g))| {
            let ts = t as i64 * 100;
            Frame {
                start: ts,
                end: ts + 100,
                students: slots
                    .iter()
                    .map(|list| {
                        list.iter()
                            .map(|&(e, r)| StudentInteraction {
                                exercise: e,
                                concepts: tags(e),
                                response: r,
                                timestamp: ts,
                            })
                            .collect()
                    })
                    .collect(),
                group: g
                    .iter()
                    .map(|&(e, y)| GroupInteraction {
                        exercise: e,
                        concepts: tags(e),
                        correct_rate: y,
                        timestamp: ts,
                    })
                    .collect(),
            }
        })
        .collect();
    GroupSequence { group: 0, frames }
}

pub fn input(students: &[Vec<Vec<(usize, u8)>>], group: &[Vec<(usize, f64)>]) -> GroupInput {
    let members = students[0].len();
    GroupInput::from_sequence(&sequence(students, group), members, &qmatrix()).unwrap()
}

/// Three students over four frames; student 2 skips frame 1.
pub fn three_student_input() -> GroupInput {
    input(
        &[
            vec![vec![(0, 1), (1, 0)], vec![(0, 0)], vec![(2, 1)]],
            vec![vec![(1, 1)], vec![(3, 1), (0, 1)], vec![]],
            vec![vec![(2, 0)], vec![(2, 1)], vec![(1, 0), (3, 1)]],
            vec![vec![(3, 1)], vec![(0, 0)], vec![(0, 1)]],
        ],
        &[
            vec![(0, 0.5)],
            vec![(1, 1.0)],
            vec![(2, 2.0 / 3.0)],
            vec![(0, 0.5), (3, 1.0 / 3.0)],
        ],
    )
}

pub fn small_config(d: usize) -> ModelConfig {
    ModelConfig {
        d,
        gcn_layers: 2,
        attn_layers: 2,
        ..ModelConfig::default()
    }
}

pub fn small_model(d: usize, seed: u64) -> Model {
    Model::new(small_config(d), 4, 3, seed).unwrap()
}

//! Synthetic group learning traces with known abilities.
//!
//! Every student holds a per-concept ability that drifts upward from frame to
//! frame while being pulled toward the group mean. Responses follow
//! `P(correct) = sigmoid(ability - difficulty)`. Group interactions are not
//! generated directly: they come out of the normal dataset build, which
//! derives correct rates from the members' responses.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::domain::{BuildParams, Dataset, DomainError, QMatrix, RawRecord};
use crate::numerics::sigmoid;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub groups: usize,
    pub students_per_group: usize,
    pub exercises: usize,
    pub concepts: usize,
    pub frames: usize,
    /// Standard deviation of the per-frame random ability step.
    pub ability_drift: f64,
    /// Mean ability gain per frame.
    pub ability_trend: f64,
    /// Pull toward the group mean, 0 (none) to 1 (members move as one).
    pub group_coupling: f64,
    pub absence_prob: f64,
    pub difficulty_min: f64,
    pub difficulty_max: f64,
    /// Exercises every present member attempts in a frame.
    pub shared_per_frame: usize,
    /// Extra exercises each present member attempts on their own, never one
    /// of the frame's shared exercises.
    pub own_per_frame: usize,
    pub span_secs: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            groups: 50,
            students_per_group: 10,
            exercises: 40,
            concepts: 8,
            frames: 8,
            ability_drift: 0.2,
            ability_trend: 0.15,
            group_coupling: 0.3,
            absence_prob: 0.1,
            difficulty_min: -1.5,
            difficulty_max: 1.5,
            shared_per_frame: 2,
            own_per_frame: 2,
            span_secs: 86_400,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.groups == 0 || self.students_per_group == 0 || self.exercises == 0 || self.concepts == 0 {
            return bad("groups, students_per_group, exercises and concepts must be >= 1");
        }
        if self.frames == 0 {
            return bad("frames must be >= 1");
        }
        if self.shared_per_frame + self.own_per_frame == 0 {
            return bad("at least one exercise per frame is required");
        }
        if self.shared_per_frame + self.own_per_frame > self.exercises {
            return bad("more exercises per frame than exercises");
        }
        for (name, p) in [
            ("group_coupling", self.group_coupling),
            ("absence_prob", self.absence_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.ability_drift >= 0.0) || !self.ability_trend.is_finite() {
            return bad("ability_drift must be >= 0 and ability_trend finite");
        }
        if !(self.difficulty_min <= self.difficulty_max) {
            return bad("difficulty_min must not exceed difficulty_max");
        }
        if self.span_secs <= 1 {
            return bad("span_secs must be > 1");
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &KeyValues) -> Result<(), SynthError> {
        kv.read("groups", &mut self.groups)?;
        kv.read("students_per_group", &mut self.students_per_group)?;
        kv.read("exercises", &mut self.exercises)?;
        kv.read("concepts", &mut self.concepts)?;
        kv.read("frames", &mut self.frames)?;
        kv.read("ability_drift", &mut self.ability_drift)?;
        kv.read("ability_trend", &mut self.ability_trend)?;
        kv.read("group_coupling", &mut self.group_coupling)?;
        kv.read("absence_prob", &mut self.absence_prob)?;
        kv.read("difficulty_min", &mut self.difficulty_min)?;
        kv.read("difficulty_max", &mut self.difficulty_max)?;
        kv.read("shared_per_frame", &mut self.shared_per_frame)?;
        kv.read("own_per_frame", &mut self.own_per_frame)?;
        kv.read("span_secs", &mut self.span_secs)?;
        kv.read("seed", &mut self.seed)?;
        self.validate()
    }
}

/// Generator-side truth, indexed like the generated dataset's catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Per exercise, in Q-matrix order.
    pub difficulty: Vec<f64>,
    /// `ability[student][frame][concept]`, students in catalog order.
    pub ability: Vec<Vec<Vec<f64>>>,
    /// `present[student][frame]`.
    pub present: Vec<Vec<bool>>,
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub records: Vec<RawRecord>,
    pub qmatrix: QMatrix,
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

/// Draws a response with `P(1) = sigmoid(logit)`.
pub fn respond<R: Rng + ?Sized>(rng: &mut R, logit: f64) -> u8 {
    u8::from(rng.random::<f64>() < sigmoid(logit))
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let exercise_label = |e: usize| format!("e{e:04}");
    let concept_label = |c: usize| format!("c{c:03}");

    // Every concept gets exercise `c` (cycling); some exercises carry a second.
    let mut entries = vec![vec![0u8; cfg.concepts]; cfg.exercises];
    for (e, row) in entries.iter_mut().enumerate() {
        row[e % cfg.concepts] = 1;
        if cfg.concepts > 1 && rng.random_bool(0.25) {
            row[rng.random_range(0..cfg.concepts)] = 1;
        }
    }
    let qmatrix = QMatrix::new(
        (0..cfg.exercises).map(exercise_label).collect(),
        (0..cfg.concepts).map(concept_label).collect(),
        entries,
    )?;
    let tags: Vec<Vec<usize>> = (0..cfg.exercises).map(|e| qmatrix.concepts_of(e)).collect();
    let difficulty: Vec<f64> = (0..cfg.exercises)
        .map(|_| {
            if cfg.difficulty_min == cfg.difficulty_max {
                cfg.difficulty_min
            } else {
                rng.random_range(cfg.difficulty_min..=cfg.difficulty_max)
            }
        })
        .collect();

    let n = cfg.students_per_group;
    let mut records = Vec::new();
    let mut ability_all = Vec::with_capacity(cfg.groups * n);
    let mut present_all = Vec::with_capacity(cfg.groups * n);
    for g in 0..cfg.groups {
        let group = format!("g{g:04}");
        let student = |s: usize| format!("{group}-s{s:03}");
        let base = g as i64 * cfg.frames as i64 * cfg.span_secs;

        let means: Vec<f64> = (0..cfg.concepts).map(|_| 0.7 * gauss(&mut rng)).collect();
        let mut theta: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                means
                    .iter()
                    .map(|m| m + (1.0 - cfg.group_coupling) * gauss(&mut rng))
                    .collect()
            })
            .collect();
        let mut ability = vec![Vec::with_capacity(cfg.frames); n];
        let mut present = vec![Vec::with_capacity(cfg.frames); n];

        for t in 0..cfg.frames {
            if t > 0 {
                let group_mean: Vec<f64> = (0..cfg.concepts)
                    .map(|c| theta.iter().map(|th| th[c]).sum::<f64>() / n as f64)
                    .collect();
                for th in theta.iter_mut() {
                    for (c, v) in th.iter_mut().enumerate() {
                        let step = cfg.ability_trend + cfg.ability_drift * gauss(&mut rng);
                        *v += cfg.group_coupling * (group_mean[c] - *v) + step;
                    }
                }
            }
            let mut here: Vec<bool> = (0..n).map(|_| !rng.random_bool(cfg.absence_prob)).collect();
            if !here.iter().any(|&p| p) {
                here[rng.random_range(0..n)] = true;
            }
            let shared: Vec<usize> = sample(&mut rng, cfg.exercises, cfg.shared_per_frame).into_vec();
            let rest: Vec<usize> = (0..cfg.exercises).filter(|e| !shared.contains(e)).collect();
            let frame_start = base + t as i64 * cfg.span_secs;
            let mut first = t == 0;
            for s in 0..n {
                ability[s].push(theta[s].clone());
                present[s].push(here[s]);
                if !here[s] {
                    continue;
                }
                let own = sample(&mut rng, rest.len(), cfg.own_per_frame).into_iter().map(|i| rest[i]);
                for e in shared.iter().copied().chain(own) {
                    let level = tags[e].iter().map(|&c| theta[s][c]).sum::<f64>() / tags[e].len() as f64;
                    // The first record pins the group's frame grid to `base`.
                    let offset = if first { 0 } else { rng.random_range(0..cfg.span_secs) };
                    first = false;
                    records.push(RawRecord {
                        row: records.len() + 1,
                        student: student(s),
                        group: group.clone(),
                        exercise: exercise_label(e),
                        concepts: tags[e].iter().map(|&c| concept_label(c)).collect(),
                        timestamp: frame_start + offset,
                        correct: respond(&mut rng, level - difficulty[e]),
                    });
                }
            }
        }
        ability_all.extend(ability);
        present_all.extend(present);
    }

    let dataset = Dataset::build(
        &records,
        &qmatrix,
        BuildParams {
            span_secs: cfg.span_secs,
            ..BuildParams::default()
        },
    )?;
    Ok(SynthData {
        records,
        qmatrix,
        dataset,
        truth: GroundTruth {
            difficulty,
            ability: ability_all,
            present: present_all,
        },
    })
}

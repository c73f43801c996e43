//! The holistic knowledge-tracing network.
//!
//! One group is processed at a time. Every frame is encoded, fused across the
//! group/student levels, turned into a graph snapshot and convolved; a causal
//! retriever then turns past snapshots into knowledge states that a readout
//! head scores against exercises.

mod attention;
mod config;
mod encode;
mod forward;
mod graph;
mod input;
mod params;
mod readout;
mod reciprocal;
mod trace;

pub use attention::{causal_mask, positional_encoding, temporal_attention, Retrieved};
pub use config::{Ablation, ModelConfig, Similarity};
pub use encode::{encode_group, encode_students};
pub use forward::{forward_group, GroupForward};
pub use graph::{block_diagonal, build_snapshot, gcn_forward, normalize_adjacency, Snapshot};
pub use input::{GroupInput, InteractionRows};
pub use params::{AttnLayerIds, Bound, MlpIds, ParamIds};
pub use readout::readout;
pub use reciprocal::{reciprocal_enhance, Enhanced};
pub use trace::{concept_probes, mastery_grid};

pub(crate) use config::on_off;

use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::domain::{Dataset, QMatrix};
use crate::numerics::{Checkpoint, NumericsError, ParamStore, Tape};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("parameter `{0}` missing")]
    MissingTensor(String),
    #[error("parameter `{name}` has shape {got:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: [usize; 2],
        got: [usize; 2],
    },
    #[error("exercise id {0} outside the embedding table")]
    UnknownExercise(usize),
    #[error("concept id {0} outside the Q-matrix")]
    UnknownConcept(usize),
    #[error("correct rate {0} outside [0, 1]")]
    InvalidRate(f64),
    #[error("concept `{0}` has no tagged exercise")]
    NoExercisesForConcept(String),
    #[error("group has no frames")]
    EmptySequence,
    #[error("checkpoint metadata lacks `{0}`")]
    MissingMeta(String),
    #[error("node {node} out of range for a group of {members} members")]
    UnknownNode { node: usize, members: usize },
}

/// Configuration plus trained parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    ids: ParamIds,
    num_exercises: usize,
    num_concepts: usize,
}

impl Model {
    /// Freshly initialised model for a catalog of the given size.
    pub fn new(config: ModelConfig, exercises: usize, concepts: usize, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let params = params::init_params(&config, exercises, concepts, seed);
        Self::from_params(config, params)
    }

    /// Wraps existing parameters after checking every expected tensor exists
    /// with the right shape.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        let find_rows = |name: &str| {
            params
                .find(name)
                .map(|id| params.get(id).rows())
                .ok_or_else(|| ModelError::MissingTensor(name.into()))
        };
        let num_exercises = find_rows("emb.exercise")?;
        let num_concepts = find_rows("emb.concept")?;
        for (name, expected) in params::layout(&config, num_exercises, num_concepts) {
            let id = params
                .find(&name)
                .ok_or_else(|| ModelError::MissingTensor(name.clone()))?;
            let got = params.get(id).shape();
            if got != expected {
                return Err(ModelError::TensorShape { name, expected, got });
            }
        }
        let ids = ParamIds::resolve(&config, &params)?;
        Ok(Self {
            config,
            params,
            ids,
            num_exercises,
            num_concepts,
        })
    }

    pub fn ids(&self) -> &ParamIds {
        &self.ids
    }

    pub fn num_exercises(&self) -> usize {
        self.num_exercises
    }

    pub fn num_concepts(&self) -> usize {
        self.num_concepts
    }

    /// Records every parameter on `tape`.
    pub fn bind<'a>(&'a self, tape: &mut Tape) -> Bound<'a> {
        Bound::new(&self.ids, &self.params, tape)
    }

    /// Forward pass of one group on an already bound tape.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, input: &GroupInput) -> Result<GroupForward, ModelError> {
        forward_group(tape, p, &self.config, input)
    }

    /// Inputs for every group of `data`, in group-id order.
    pub fn inputs(data: &Dataset) -> Result<Vec<GroupInput>, ModelError> {
        data.sequences
            .groups
            .iter()
            .map(|seq| {
                GroupInput::from_sequence(seq, data.catalog.membership[seq.group].len(), &data.qmatrix)
            })
            .collect()
    }

    /// Predicted probabilities for one group, paired with observed outcomes.
    pub fn predict(&self, input: &GroupInput) -> Result<Predictions, ModelError> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let out = self.forward(&mut tape, &p, input)?;
        let values = |v: Option<_>| v.map(|v| tape.value(v).data().to_vec()).unwrap_or_default();
        Ok(Predictions {
            student: values(out.student_pred),
            student_truth: out.student_rows.iter().map(|&i| input.student.outcome[i]).collect(),
            group: values(out.group_pred),
            group_truth: out.group_rows.iter().map(|&i| input.group.outcome[i]).collect(),
        })
    }

    /// Per-frame mastery of `concepts` for one node of a group (0 is the group
    /// itself, `1 + slot` a member). `out[c][t]` is concept `c` at frame `t`.
    pub fn trace(
        &self,
        input: &GroupInput,
        node: usize,
        qmatrix: &QMatrix,
        concepts: &[usize],
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        if node > input.members {
            return Err(ModelError::UnknownNode {
                node,
                members: input.members,
            });
        }
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let out = self.forward(&mut tape, &p, input)?;
        let rows: Vec<usize> = (0..out.frames).map(|t| out.state_row(t, node)).collect();
        let states = tape.embedding_lookup(out.states, &rows)?;
        let probes = concept_probes(&mut tape, &p, qmatrix, concepts)?;
        mastery_grid(&mut tape, &p, node == 0, states, probes)
    }

    /// Checkpoint carrying the configuration as metadata, followed by `extra`.
    pub fn to_checkpoint(&self, extra: &[(String, String)]) -> Checkpoint {
        let mut metadata: Vec<(String, String)> = self
            .config
            .to_key_values()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        metadata.extend(extra.iter().cloned());
        Checkpoint {
            metadata,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self, ModelError> {
        let mut kv = KeyValues::default();
        for (k, v) in &ckpt.metadata {
            kv.set(k, v);
        }
        if kv.get("d").is_none() {
            return Err(ModelError::MissingMeta("d".into()));
        }
        let mut config = ModelConfig::default();
        config.apply(&kv)?;
        Self::from_params(config, ckpt.params)
    }
}

/// Predictions for interactions outside each group's first frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Predictions {
    pub student: Vec<f64>,
    pub student_truth: Vec<f64>,
    pub group: Vec<f64>,
    pub group_truth: Vec<f64>,
}

impl Predictions {
    pub fn extend(&mut self, other: Predictions) {
        self.student.extend(other.student);
        self.student_truth.extend(other.student_truth);
        self.group.extend(other.group);
        self.group_truth.extend(other.group_truth);
    }
}

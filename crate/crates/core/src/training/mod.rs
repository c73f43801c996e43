//! Joint optimisation of the student, group and contrastive objectives.

mod cv;
mod loss;
mod train;

pub use cv::{cross_validate, fold_assignment, CvReport, FoldReport};
pub use loss::{contrastive_loss, group_loss, student_loss, total_loss, BCE_CLAMP};
pub use train::{
    batch_loss, derive_seed, evaluate, fit, split_validation, train, BatchLoss, EpochRecord, LossReport,
    TrainOutcome,
};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Flag, KeyValues};
use crate::metrics::MetricError;
use crate::model::{on_off, GroupInput, Model, ModelError};
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("training diverged in epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        /// Best parameters seen before the divergence.
        last_good: Box<Model>,
    },
    #[error("{groups} groups cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },
    #[error("no groups to train on")]
    NoTrainingGroups,
}

/// Which pairs form the contrastive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DenominatorMode {
    /// Negatives only.
    NegativesOnly,
    /// Negatives plus the positive pair.
    StandardInfoNce,
}

impl FromStr for DenominatorMode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "negatives-only" => Ok(Self::NegativesOnly),
            "standard-infonce" => Ok(Self::StandardInfoNce),
            _ => Err(()),
        }
    }
}

impl fmt::Display for DenominatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NegativesOnly => "negatives-only",
            Self::StandardInfoNce => "standard-infonce",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the contrastive term.
    pub gamma: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// Chance of flipping each student response in the augmented view.
    pub flip_prob: f64,
    pub epochs: usize,
    pub batch_groups: usize,
    pub seed: u64,
    pub lr: f64,
    pub folds: usize,
    pub denominator: DenominatorMode,
    /// Off drops the contrastive term and the augmented forward pass.
    pub contrastive: bool,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    /// Share of training groups held out to pick the best epoch.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.01,
            tau: 0.05,
            flip_prob: 0.1,
            epochs: 30,
            batch_groups: 4,
            seed: 0,
            lr: 1e-3,
            folds: 5,
            denominator: DenominatorMode::NegativesOnly,
            contrastive: true,
            clip_norm: 5.0,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad(format!("flip_prob must lie in [0, 1], got {}", self.flip_prob));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.batch_groups == 0 {
            return bad("batch_groups must be >= 1".into());
        }
        if !(self.lr >= 0.0) || !(self.gamma >= 0.0) || !(self.clip_norm > 0.0) {
            return bad("lr and gamma must be >= 0 and clip_norm > 0".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction must lie in [0, 1), got {}", self.val_fraction));
        }
        Ok(())
    }

    /// Reads the training keys from `kv`; other keys are ignored.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<(), ConfigError> {
        kv.read("gamma", &mut self.gamma)?;
        kv.read("tau", &mut self.tau)?;
        kv.read("flip_prob", &mut self.flip_prob)?;
        kv.read("epochs", &mut self.epochs)?;
        kv.read("batch_groups", &mut self.batch_groups)?;
        kv.read("seed", &mut self.seed)?;
        kv.read("lr", &mut self.lr)?;
        kv.read("folds", &mut self.folds)?;
        kv.read("denominator", &mut self.denominator)?;
        let mut flag = Flag(self.contrastive);
        kv.read("contrastive", &mut flag)?;
        self.contrastive = flag.0;
        kv.read("clip_norm", &mut self.clip_norm)?;
        kv.read("val_fraction", &mut self.val_fraction)?;
        self.validate()
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("gamma", self.gamma);
        kv.set("tau", self.tau);
        kv.set("flip_prob", self.flip_prob);
        kv.set("epochs", self.epochs);
        kv.set("batch_groups", self.batch_groups);
        kv.set("seed", self.seed);
        kv.set("lr", self.lr);
        kv.set("folds", self.folds);
        kv.set("denominator", self.denominator);
        kv.set("contrastive", on_off(self.contrastive));
        kv.set("clip_norm", self.clip_norm);
        kv.set("val_fraction", self.val_fraction);
        kv
    }
}

/// Flips each 0/1 response independently with probability `flip_prob`.
pub fn augment_flip<R: Rng + ?Sized>(responses: &[f64], flip_prob: f64, rng: &mut R) -> Vec<f64> {
    responses
        .iter()
        .map(|&r| if rng.random_bool(flip_prob) { 1.0 - r } else { r })
        .collect()
}

/// Copy of `input` with student responses flipped; group rates are kept.
pub fn augment_group<R: Rng + ?Sized>(input: &GroupInput, flip_prob: f64, rng: &mut R) -> GroupInput {
    input.with_student_outcomes(augment_flip(&input.student.outcome, flip_prob, rng))
}

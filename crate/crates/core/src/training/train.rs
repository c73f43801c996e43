use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{contrastive_loss, group_loss, student_loss, total_loss};
use super::{augment_group, TrainConfig, TrainError};
use crate::domain::Dataset;
use crate::metrics::{auc, rmse_mae, MetricReport};
use crate::model::{GroupForward, GroupInput, Model, ModelConfig, Predictions};
use crate::numerics::{clip_global_norm, Adam, AdamConfig, Tape, Tensor, Var};

/// Independent seed for stream `stream` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scalar values of one batch objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchLoss {
    /// Summed squared error of group predictions.
    pub group: f64,
    /// Summed cross-entropy of student predictions (not yet divided by
    /// group size).
    pub student: f64,
    pub contrastive: f64,
    pub total: f64,
}

impl std::ops::AddAssign for BatchLoss {
    fn add_assign(&mut self, o: Self) {
        self.group += o.group;
        self.student += o.student;
        self.contrastive += o.contrastive;
        self.total += o.total;
    }
}

/// Student states outside frame 0, grouped by frame, as `(states, row)`.
fn student_state_rows(out: &GroupForward, pools: &mut BTreeMap<usize, Vec<(Var, usize)>>) {
    for t in 1..out.frames {
        let pool = pools.entry(t).or_default();
        for node in 1..out.nodes {
            pool.push((out.states, out.state_row(t, node)));
        }
    }
}

fn gather(tape: &mut Tape, rows: &[(Var, usize)]) -> Result<Var, TrainError> {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let src = rows[i].0;
        let mut idx = Vec::new();
        while i < rows.len() && rows[i].0 == src {
            idx.push(rows[i].1);
            i += 1;
        }
        parts.push(tape.embedding_lookup(src, &idx)?);
    }
    Ok(if parts.len() == 1 {
        parts[0]
    } else {
        tape.concat_rows(&parts)?
    })
}

/// Builds the objective of one batch on `tape`.
///
/// Every group contributes its squared group error plus its student
/// cross-entropy divided by its size. With `augmented` views, student states
/// of each frame `t >= 1` are contrasted against the augmented states of all
/// students in the batch at that frame.
pub fn batch_loss(
    tape: &mut Tape,
    model: &Model,
    p: &crate::model::Bound,
    batch: &[&GroupInput],
    augmented: Option<&[GroupInput]>,
    cfg: &TrainConfig,
) -> Result<(Var, BatchLoss), TrainError> {
    let mut parts = Vec::with_capacity(batch.len());
    let mut values = BatchLoss::default();
    let mut pools = BTreeMap::new();
    let mut aug_pools = BTreeMap::new();
    for (i, input) in batch.iter().enumerate() {
        let out = model.forward(tape, p, input)?;
        let st: Vec<f64> = out.student_rows.iter().map(|&r| input.student.outcome[r]).collect();
        let gt: Vec<f64> = out.group_rows.iter().map(|&r| input.group.outcome[r]).collect();
        let ls = student_loss(tape, out.student_pred, &st)?;
        let lg = group_loss(tape, out.group_pred, &gt)?;
        values.student += tape.value(ls).item();
        values.group += tape.value(lg).item();
        parts.push((lg, ls, input.members));
        if let Some(aug) = augmented {
            let aug_out = model.forward(tape, p, &aug[i])?;
            student_state_rows(&out, &mut pools);
            student_state_rows(&aug_out, &mut aug_pools);
        }
    }
    let mut contrastive = None;
    if augmented.is_some() {
        for (t, rows) in &pools {
            let h = gather(tape, rows)?;
            let h_aug = gather(tape, &aug_pools[t])?;
            if let Some(term) = contrastive_loss(tape, h, h_aug, cfg.tau, cfg.denominator)? {
                contrastive = Some(match contrastive {
                    None => term,
                    Some(acc) => tape.add(acc, term)?,
                });
            }
        }
        if contrastive.is_none() {
            log::warn!("batch holds fewer than two students per frame; contrastive term skipped");
        }
    }
    values.contrastive = contrastive.map_or(0.0, |v| tape.value(v).item());
    let total = total_loss(tape, &parts, contrastive, cfg.gamma)?;
    values.total = tape.value(total).item();
    Ok((total, values))
}

/// One line of the per-epoch log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub group_loss: f64,
    pub student_loss: f64,
    pub contrastive_loss: f64,
    pub total: f64,
    /// Group error plus size-scaled student cross-entropy on held-out groups.
    pub val_loss: f64,
    pub val_auc: Option<f64>,
    pub val_rmse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub model: Model,
    pub best_epoch: usize,
    pub report: LossReport,
}

fn validation_record(model: &Model, val: &[GroupInput]) -> Result<(f64, Option<f64>, Option<f64>), TrainError> {
    let mut pooled = Predictions::default();
    let mut loss = 0.0;
    for input in val {
        let pred = model.predict(input)?;
        let bce: f64 = pred
            .student
            .iter()
            .zip(&pred.student_truth)
            .map(|(&p, &r)| {
                let p = p.clamp(super::BCE_CLAMP, 1.0 - super::BCE_CLAMP);
                -(r * p.ln() + (1.0 - r) * (1.0 - p).ln())
            })
            .sum();
        let mse: f64 = pred.group.iter().zip(&pred.group_truth).map(|(p, y)| (p - y) * (p - y)).sum();
        loss += mse + bce / input.members as f64;
        pooled.extend(pred);
    }
    let val_auc = auc(&pooled.student, &pooled.student_truth).ok();
    let val_rmse = rmse_mae(&pooled.group, &pooled.group_truth).ok().map(|(r, _)| r);
    Ok((loss, val_auc, val_rmse))
}

/// Trains `model` on `train_set`, keeping the parameters that score best on
/// `val_set`. `on_epoch` sees every epoch record as it is produced.
pub fn train(
    mut model: Model,
    train_set: &[GroupInput],
    val_set: &[GroupInput],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::NoTrainingGroups);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &model.params,
    );
    let (val_loss0, _, _) = validation_record(&model, val_set)?;
    let mut best = (val_loss0, 0usize, model.params.clone());
    let mut report = LossReport::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let diverged = |epoch: usize, reason: String, best_params: &crate::numerics::ParamStore, model: &Model| {
        let mut last_good = model.clone();
        last_good.params = best_params.clone();
        TrainError::Diverged {
            epoch,
            reason,
            last_good: Box::new(last_good),
        }
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = BatchLoss::default();
        for chunk in order.chunks(cfg.batch_groups) {
            let batch: Vec<&GroupInput> = chunk.iter().map(|&g| &train_set[g]).collect();
            let augmented: Option<Vec<GroupInput>> = (cfg.contrastive && cfg.gamma > 0.0)
                .then(|| batch.iter().map(|g| augment_group(g, cfg.flip_prob, &mut rng)).collect());
            let mut tape = Tape::new();
            let p = model.bind(&mut tape);
            let (loss, values) = batch_loss(&mut tape, &model, &p, &batch, augmented.as_deref(), cfg)?;
            if !values.total.is_finite() {
                return Err(diverged(epoch, format!("loss {}", values.total), &best.2, &model));
            }
            let vars: Vec<Var> = p.vars().to_vec();
            let grads = tape.backward(loss)?;
            let mut grads: Vec<Tensor> = vars
                .iter()
                .zip(model.params.tensors())
                .map(|(&v, t)| grads.get_or_zeros(v, t.shape()))
                .collect();
            clip_global_norm(&mut grads, cfg.clip_norm);
            if let Err(e) = adam.step(&mut model.params, &grads) {
                return Err(diverged(epoch, e.to_string(), &best.2, &model));
            }
            sums += values;
        }
        let (val_loss, val_auc, val_rmse) = validation_record(&model, val_set)?;
        let record = EpochRecord {
            epoch,
            group_loss: sums.group,
            student_loss: sums.student,
            contrastive_loss: sums.contrastive,
            total: sums.total,
            val_loss,
            val_auc,
            val_rmse,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} val {:.4} auc {:?}",
            record.total,
            record.val_loss,
            record.val_auc
        );
        on_epoch(&record);
        report.history.push(record);
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params.clone());
        }
    }
    let best_epoch = best.1;
    model.params = best.2;
    Ok(TrainOutcome {
        model,
        best_epoch,
        report,
    })
}

/// Splits `n` groups into `(train, validation)` index lists. The validation
/// share is drawn with `seed`; if it would be empty, validation reuses the
/// training groups.
pub fn split_validation(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let n_val = (n as f64 * fraction).floor() as usize;
    if n_val == 0 || n_val >= n {
        return (idx.clone(), idx);
    }
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = idx.split_off(n - n_val);
    idx.sort_unstable();
    val.sort_unstable();
    (idx, val)
}

/// Builds, trains and returns a model for every group of `data`.
pub fn fit(
    data: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    let inputs = Model::inputs(data)?;
    fit_inputs(&inputs, data, model_cfg, cfg, 0, on_epoch)
}

pub(crate) fn fit_inputs(
    inputs: &[GroupInput],
    data: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    stream: u64,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    let model = Model::new(
        model_cfg.clone(),
        data.qmatrix.num_exercises(),
        data.qmatrix.num_concepts(),
        derive_seed(cfg.seed, 2 * stream),
    )?;
    let (tr, va) = split_validation(inputs.len(), cfg.val_fraction, derive_seed(cfg.seed, 2 * stream + 1));
    let train_set: Vec<GroupInput> = tr.iter().map(|&i| inputs[i].clone()).collect();
    let val_set: Vec<GroupInput> = va.iter().map(|&i| inputs[i].clone()).collect();
    let run_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, 2 * stream + 2),
        ..cfg.clone()
    };
    train(model, &train_set, &val_set, &run_cfg, on_epoch)
}

/// Scores `model` on `inputs`, pooling every prediction outside frame 0.
pub fn evaluate(model: &Model, inputs: &[GroupInput]) -> Result<(MetricReport, Predictions), TrainError> {
    let mut pooled = Predictions::default();
    for input in inputs {
        pooled.extend(model.predict(input)?);
    }
    let report = MetricReport::compute(&pooled.student, &pooled.student_truth, &pooled.group, &pooled.group_truth)?;
    Ok((report, pooled))
}

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::train::{evaluate, fit_inputs, EpochRecord, LossReport};
use super::{TrainConfig, TrainError};
use crate::domain::Dataset;
use crate::metrics::{mean_std, MetricReport};
use crate::model::{Model, ModelConfig};

/// Fold of every group. Groups are ranked by size (ties by id) and dealt
/// round-robin, so each fold sees a similar spread of group sizes.
pub fn fold_assignment(sizes: &[usize], folds: usize) -> Result<Vec<usize>, TrainError> {
    if sizes.len() < folds {
        return Err(TrainError::TooFewGroups {
            groups: sizes.len(),
            folds,
        });
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&g| (sizes[g], g));
    let mut fold = vec![0; sizes.len()];
    for (rank, &g) in order.iter().enumerate() {
        fold[g] = rank % folds;
    }
    Ok(fold)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    /// Indices into the dataset's group sequences.
    pub test_groups: Vec<usize>,
    pub metrics: MetricReport,
    pub best_epoch: usize,
    pub history: LossReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    /// `[auc, acc, rmse, mae]`
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl CvReport {
    fn from_folds(folds: Vec<FoldReport>) -> Self {
        let column = |f: fn(&MetricReport) -> f64| {
            mean_std(&folds.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>())
        };
        let cols = [
            column(|m| m.auc),
            column(|m| m.acc),
            column(|m| m.rmse),
            column(|m| m.mae),
        ];
        Self {
            mean: cols.map(|c| c.0),
            std: cols.map(|c| c.1),
            folds,
        }
    }

    /// One row per fold followed by `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("fold,{}\n", MetricReport::CSV_HEADER);
        for f in &self.folds {
            out.push_str(&format!("{},{}\n", f.fold, f.metrics.csv_row()));
        }
        let row = |label: &str, v: &[f64; 4]| format!("{label},{},{},{},{},,\n", v[0], v[1], v[2], v[3]);
        out.push_str(&row("mean", &self.mean));
        out.push_str(&row("std", &self.std));
        out
    }
}

/// Trains one model per fold on the other folds and scores it on the
/// held-out groups. Up to `threads` folds run at once; results do not depend
/// on the thread count.
pub fn cross_validate(
    data: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    threads: usize,
    on_epoch: impl Fn(usize, &EpochRecord) + Sync,
) -> Result<CvReport, TrainError> {
    cfg.validate()?;
    let inputs = Model::inputs(data)?;
    let sizes: Vec<usize> = inputs.iter().map(|i| i.members).collect();
    let assignment = fold_assignment(&sizes, cfg.folds)?;

    let run_fold = |fold: usize| -> Result<FoldReport, TrainError> {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..inputs.len()).partition(|&g| assignment[g] == fold);
        let train_inputs: Vec<_> = train.iter().map(|&g| inputs[g].clone()).collect();
        let test_inputs: Vec<_> = test.iter().map(|&g| inputs[g].clone()).collect();
        let outcome = fit_inputs(&train_inputs, data, model_cfg, cfg, fold as u64 + 1, |r| on_epoch(fold, r))?;
        let (metrics, _) = evaluate(&outcome.model, &test_inputs)?;
        Ok(FoldReport {
            fold,
            test_groups: test,
            metrics,
            best_epoch: outcome.best_epoch,
            history: outcome.report,
        })
    };

    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<FoldReport, TrainError>>>> =
        Mutex::new((0..cfg.folds).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, cfg.folds) {
            s.spawn(|| loop {
                let fold = {
                    let mut n = next.lock().expect("fold counter");
                    let f = *n;
                    *n += 1;
                    f
                };
                if fold >= cfg.folds {
                    break;
                }
                let r = run_fold(fold);
                results.lock().expect("fold results")[fold] = Some(r);
            });
        }
    });
    let folds = results
        .into_inner()
        .expect("fold results")
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CvReport::from_folds(folds))
}

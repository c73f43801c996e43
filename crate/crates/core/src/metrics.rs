//! Scoring of individual (AUC, ACC) and group (RMSE, MAE) predictions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("AUC undefined: labels contain a single class")]
    SingleClass,
    #[error("no predictions to score")]
    Empty,
    #[error("{predictions} predictions for {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
}

fn check(predictions: usize, targets: usize) -> Result<(), MetricError> {
    if predictions != targets {
        return Err(MetricError::LengthMismatch { predictions, targets });
    }
    if predictions == 0 {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Area under the ROC curve as the Mann-Whitney rank statistic; tied scores
/// share their mean rank, which counts each tied positive/negative pair as
/// one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64, MetricError> {
    check(scores.len(), labels.len())?;
    let positives = labels.iter().filter(|&&l| l >= 0.5).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum keeps midranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 averaged, doubled.
        let twice_mid = (i + 1 + j + 1) as u128;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k] >= 0.5).count() as u128;
        twice_rank_sum += twice_mid * pos_in_tie;
        i = j + 1;
    }
    let (p, n) = (positives as u128, negatives as u128);
    // U = R - p(p+1)/2, doubled throughout.
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// Fraction of predictions on the right side of `threshold` (scores at the
/// threshold count as positive).
pub fn acc(scores: &[f64], labels: &[f64], threshold: f64) -> Result<f64, MetricError> {
    check(scores.len(), labels.len())?;
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= threshold) == (l >= 0.5))
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

/// `(rmse, mae)`.
pub fn rmse_mae(predictions: &[f64], targets: &[f64]) -> Result<(f64, f64), MetricError> {
    check(predictions.len(), targets.len())?;
    let n = predictions.len() as f64;
    let (sq, abs) = predictions
        .iter()
        .zip(targets)
        .fold((0.0, 0.0), |(sq, abs), (p, t)| (sq + (p - t) * (p - t), abs + (p - t).abs()));
    Ok(((sq / n).sqrt(), abs / n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub acc: f64,
    pub rmse: f64,
    pub mae: f64,
    pub student_count: usize,
    pub group_count: usize,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "auc,acc,rmse,mae,student_predictions,group_predictions";

    /// Scores pooled student and group predictions.
    pub fn compute(
        student: &[f64],
        student_truth: &[f64],
        group: &[f64],
        group_truth: &[f64],
    ) -> Result<Self, MetricError> {
        let (rmse, mae) = rmse_mae(group, group_truth)?;
        Ok(Self {
            auc: auc(student, student_truth)?,
            acc: acc(student, student_truth, 0.5)?,
            rmse,
            mae,
            student_count: student.len(),
            group_count: group.len(),
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.auc, self.acc, self.rmse, self.mae, self.student_count, self.group_count
        )
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "AUC {:.4}  ACC {:.4}  RMSE {:.4}  MAE {:.4}",
            self.auc, self.acc, self.rmse, self.mae
        )
    }
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

//! Classification metrics, ranking curves and multi-run aggregation.
//!
//! Hard predictions use `p ≥ 0.5` on the positive-class probability.
//! Ratios with a zero denominator evaluate to 0 and raise a flag instead of
//! failing, so one degenerate run does not abort a batch.

mod aggregate;
mod curves;

pub use aggregate::{aggregate_runs, summarize, Metric, RunAggregate, RunMetrics, Summary};
pub use curves::{pr_auc, pr_curve, roc_auc, roc_curve, write_curve_csv, CurvePoint};

/// Decision threshold on the positive-class probability.
pub const THRESHOLD: f64 = 0.5;

pub fn predict(p: f64) -> bool {
    p >= THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[bool], labels: &[bool]) -> Self {
        assert_eq!(predicted.len(), labels.len());
        let mut c = Confusion::default();
        for (&p, &y) in predicted.iter().zip(labels) {
            match (p, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// Thresholds probabilities at [`THRESHOLD`].
    pub fn from_scores(scores: &[f64], labels: &[bool]) -> Self {
        let predicted: Vec<bool> = scores.iter().map(|&p| predict(p)).collect();
        Self::from_predictions(&predicted, labels)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Which ratios hit a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Degenerate {
    /// No positive predictions.
    pub precision: bool,
    /// No positive labels.
    pub recall: bool,
    /// Precision and recall both zero.
    pub f1: bool,
    /// No negative labels.
    pub specificity: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.specificity
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub degenerate: Degenerate,
}

fn ratio(num: usize, den: usize, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn threshold_metrics(c: &Confusion) -> ThresholdMetrics {
    let mut d = Degenerate::default();
    let precision = ratio(c.tp, c.tp + c.fp, &mut d.precision);
    let recall = ratio(c.tp, c.tp + c.fn_, &mut d.recall);
    let specificity = ratio(c.tn, c.tn + c.fp, &mut d.specificity);
    let f1 = if precision + recall == 0.0 {
        d.f1 = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ThresholdMetrics {
        precision,
        recall,
        f1,
        balanced_accuracy: (recall + specificity) / 2.0,
        degenerate: d,
    }
}

/// F1 of thresholded probabilities.
pub fn f1_score(scores: &[f64], labels: &[bool]) -> f64 {
    threshold_metrics(&Confusion::from_scores(scores, labels)).f1
}

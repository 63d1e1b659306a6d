use std::fmt;

use super::{pr_auc, roc_auc, threshold_metrics, Confusion, ThresholdMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    F1,
    BalancedAccuracy,
    Precision,
    Recall,
    RocAuc,
    PrAuc,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::F1,
        Metric::BalancedAccuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::RocAuc,
        Metric::PrAuc,
    ];

    /// The four thresholded metrics shown in result tables.
    pub const HEADLINE: [Metric; 4] = [Metric::F1, Metric::BalancedAccuracy, Metric::Precision, Metric::Recall];

    /// Machine-readable name.
    pub fn name(self) -> &'static str {
        match self {
            Metric::F1 => "f1",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::RocAuc => "roc_auc",
            Metric::PrAuc => "pr_auc",
        }
    }

    /// Column heading.
    pub fn label(self) -> &'static str {
        match self {
            Metric::F1 => "F1",
            Metric::BalancedAccuracy => "BA",
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
            Metric::RocAuc => "ROC AUC",
            Metric::PrAuc => "PR AUC",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything measured on one evaluated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub confusion: Confusion,
    pub thresholded: ThresholdMetrics,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
}

impl RunMetrics {
    pub fn evaluate(scores: &[f64], labels: &[bool]) -> Self {
        let confusion = Confusion::from_scores(scores, labels);
        RunMetrics {
            confusion,
            thresholded: threshold_metrics(&confusion),
            roc_auc: roc_auc(scores, labels),
            pr_auc: pr_auc(scores, labels),
        }
    }

    /// `None` when the metric is undefined for this run.
    pub fn get(&self, m: Metric) -> Option<f64> {
        let t = &self.thresholded;
        match m {
            Metric::F1 => Some(t.f1),
            Metric::BalancedAccuracy => {
                (!t.degenerate.recall && !t.degenerate.specificity).then_some(t.balanced_accuracy)
            }
            Metric::Precision => Some(t.precision),
            Metric::Recall => (!t.degenerate.recall).then_some(t.recall),
            Metric::RocAuc => self.roc_auc,
            Metric::PrAuc => self.pr_auc,
        }
    }

    /// The classifier never predicted the positive class.
    pub fn all_negative(&self) -> bool {
        self.confusion.tp + self.confusion.fp == 0
    }

    /// Reports precision as 1 for an all-negative classifier, the convention
    /// of transfer tables where such models are marked with a dagger. The
    /// degenerate flag stays set.
    pub fn with_all_negative_precision(mut self) -> Self {
        if self.all_negative() {
            self.thresholded.precision = 1.0;
        }
        self
    }
}

/// Mean and sample standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// `None` with fewer than two values.
    pub sd: Option<f64>,
    pub n: usize,
}

/// `None` for an empty slice.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Some(Summary { mean, sd, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunAggregate {
    pub attempted: usize,
    /// Runs that produced no metrics.
    pub failed: usize,
    /// Successful runs that predicted no positives.
    pub all_negative: usize,
    pub metrics: Vec<(Metric, Option<Summary>)>,
}

impl RunAggregate {
    pub fn get(&self, m: Metric) -> Option<Summary> {
        self.metrics.iter().find(|(k, _)| *k == m).and_then(|(_, s)| *s)
    }

    /// Every successful run predicted only negatives.
    pub fn all_negative_flag(&self) -> bool {
        let ok = self.attempted - self.failed;
        ok > 0 && self.all_negative == ok
    }
}

/// Aggregates runs; `None` entries are failed runs and are excluded.
pub fn aggregate_runs(runs: &[Option<RunMetrics>]) -> RunAggregate {
    let ok: Vec<&RunMetrics> = runs.iter().flatten().collect();
    let metrics = Metric::ALL
        .iter()
        .map(|&m| {
            let values: Vec<f64> = ok.iter().filter_map(|r| r.get(m)).collect();
            (m, summarize(&values))
        })
        .collect();
    RunAggregate {
        attempted: runs.len(),
        failed: runs.len() - ok.len(),
        all_negative: ok.iter().filter(|r| r.all_negative()).count(),
        metrics,
    }
}

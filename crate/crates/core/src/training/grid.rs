use std::cmp::Ordering;

use rayon::prelude::*;

use super::split::{company_folds, CompanyIndex};
use super::train::{train_model, StopRule, TrainConfig, TrainInputs, TrainOutcome};
use crate::dataio::MinMaxScaler;
use crate::error::{Error, Result};
use crate::graph::RelationalGraph;
use crate::models::{init_params, ModelSpec};
use crate::tensor::Matrix;

/// Hyperparameter values searched; the grid is their Cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub hidden_units: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            learning_rates: vec![1e-2, 1e-3],
            weight_decays: vec![1e-2, 1e-3],
            hidden_units: vec![16, 32],
        }
    }
}

impl GridSpec {
    /// All combinations, with epoch limits taken from `base`.
    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &weight_decay in &self.weight_decays {
                for &hidden_units in &self.hidden_units {
                    out.push(TrainConfig {
                        learning_rate,
                        weight_decay,
                        hidden_units,
                        ..*base
                    });
                }
            }
        }
        out
    }
}

/// Which rows the min-max scaler is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationScope {
    /// Only the rows being trained on.
    #[default]
    TrainingRows,
    /// Every row of the dataset.
    AllRows,
}

/// Which nodes message passing may see while training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphMode {
    /// The whole graph; the loss alone is masked.
    #[default]
    Transductive,
    /// Training uses edges among training nodes only; validation adds the
    /// validation nodes; evaluation uses the full graph.
    Inductive,
}

/// How the selected configuration is refitted on train+val.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FinalFit {
    /// Train on train+val, early-stopping on the validation rows.
    #[default]
    ValidationStopping,
    /// Train on train+val for the mean best epoch seen during
    /// cross-validation.
    FixedEpochs,
}

/// Fixed choices that shape every fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    pub normalization: NormalizationScope,
    pub graph_mode: GraphMode,
    pub final_fit: FinalFit,
    pub folds: usize,
    pub base: TrainConfig,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            normalization: NormalizationScope::TrainingRows,
            graph_mode: GraphMode::Transductive,
            final_fit: FinalFit::ValidationStopping,
            folds: 3,
            base: TrainConfig::default(),
        }
    }
}

/// One dataset prepared for fitting.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    /// Raw (unnormalized) features.
    pub features: &'a Matrix,
    pub labels: &'a [bool],
    pub graph: Option<&'a RelationalGraph>,
    pub companies: &'a CompanyIndex,
    /// Architecture; `hidden_units` is overridden by each config.
    pub model: &'a ModelSpec,
}

/// A fitted model with the scaler and normalized features it used.
#[derive(Debug, Clone)]
pub struct Fit {
    pub outcome: TrainOutcome,
    pub scaler: MinMaxScaler,
    pub features: Matrix,
}

/// Deterministic seed for sub-stream `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(base ^ mix(stream))
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

fn keep_mask(n: usize, rows: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &r in rows {
        m[r] = true;
    }
    m
}

/// Normalizes, builds the graphs `protocol` calls for, initializes with
/// `seed` and trains.
pub fn fit(
    problem: &Problem<'_>,
    config: &TrainConfig,
    train_rows: &[usize],
    val_rows: &[usize],
    protocol: &Protocol,
    stop: StopRule,
    seed: u64,
) -> Result<Fit> {
    let n = problem.features.rows();
    let all: Vec<usize>;
    let fit_rows = match protocol.normalization {
        NormalizationScope::TrainingRows => train_rows,
        NormalizationScope::AllRows => {
            all = (0..n).collect();
            &all
        }
    };
    let scaler = MinMaxScaler::fit(problem.features, fit_rows)?;
    let features = scaler.transform(problem.features);

    let (train_graph, val_graph) = match (problem.graph, protocol.graph_mode) {
        (Some(g), GraphMode::Inductive) => (
            Some(g.restricted(&keep_mask(n, train_rows))?),
            Some(g.restricted(&keep_mask(n, &union(train_rows, val_rows)))?),
        ),
        _ => (None, None),
    };
    let inputs = TrainInputs {
        features: &features,
        labels: problem.labels,
        train_graph: train_graph.as_ref().or(problem.graph),
        val_graph: val_graph.as_ref().or(problem.graph),
        train_rows,
        val_rows,
    };
    let mut spec = problem.model.clone();
    spec.hidden_units = config.hidden_units;
    let init = init_params(&spec, derive_seed(seed, 0))?;
    let outcome = train_model(init, &inputs, config, stop, derive_seed(seed, 1))?;
    Ok(Fit {
        outcome,
        scaler,
        features,
    })
}

/// Cross-validated score of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigScore {
    pub config: TrainConfig,
    /// Mean validation F1 over folds; `-∞` if any fold failed.
    pub mean_f1: f64,
    pub fold_f1: Vec<f64>,
    pub best_epochs: Vec<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: TrainConfig,
    pub scores: Vec<ConfigScore>,
}

impl GridResult {
    /// Mean best epoch of the selected configuration across folds.
    pub fn best_epoch_estimate(&self) -> usize {
        let s = self
            .scores
            .iter()
            .find(|s| s.config == self.best)
            .expect("best is scored");
        let mean = s.best_epochs.iter().sum::<usize>() as f64 / s.best_epochs.len().max(1) as f64;
        (mean.round() as usize).max(1)
    }
}

/// Orders by score (higher first), then lower learning rate, lower weight
/// decay and fewer hidden units.
pub fn rank(a: &ConfigScore, b: &ConfigScore) -> Ordering {
    b.mean_f1
        .total_cmp(&a.mean_f1)
        .then(a.config.learning_rate.total_cmp(&b.config.learning_rate))
        .then(a.config.weight_decay.total_cmp(&b.config.weight_decay))
        .then(a.config.hidden_units.cmp(&b.config.hidden_units))
}

/// Picks the winning configuration; `None` if every configuration failed.
pub fn select_best(scores: &[ConfigScore]) -> Option<TrainConfig> {
    scores
        .iter()
        .filter(|s| s.mean_f1.is_finite())
        .min_by(|a, b| rank(a, b))
        .map(|s| s.config)
}

/// Company-level `protocol.folds`-fold cross-validation of every config over
/// `cv_rows`. Jobs run in parallel; results do not depend on scheduling.
pub fn grid_search(
    problem: &Problem<'_>,
    cv_rows: &[usize],
    grid: &[TrainConfig],
    protocol: &Protocol,
    seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    let folds = company_folds(problem.companies, cv_rows, protocol.folds, derive_seed(seed, u64::MAX))?;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let results: Vec<Result<(f64, usize)>> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(c, f))| {
            let fold = &folds[f];
            let fit = fit(
                problem,
                &grid[c],
                &fold.train_rows,
                &fold.val_rows,
                protocol,
                StopRule::Patience,
                derive_seed(seed, j as u64),
            )?;
            Ok((fit.outcome.best_val_f1.unwrap_or(0.0), fit.outcome.best_epoch))
        })
        .collect();

    let scores: Vec<ConfigScore> = grid
        .iter()
        .enumerate()
        .map(|(c, config)| {
            let mine = &results[c * folds.len()..(c + 1) * folds.len()];
            let failure = mine.iter().find_map(|r| r.as_ref().err().map(|e| e.to_string()));
            let ok: Vec<(f64, usize)> = mine.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
            let fold_f1: Vec<f64> = ok.iter().map(|x| x.0).collect();
            ConfigScore {
                config: *config,
                mean_f1: if failure.is_some() {
                    f64::NEG_INFINITY
                } else {
                    fold_f1.iter().sum::<f64>() / fold_f1.len() as f64
                },
                fold_f1,
                best_epochs: ok.iter().map(|x| x.1).collect(),
                failure,
            }
        })
        .collect();
    let best = select_best(&scores).ok_or_else(|| {
        let reasons: Vec<String> = scores.iter().filter_map(|s| s.failure.clone()).collect();
        Error::Grid(format!(
            "all {} configurations failed: {}",
            scores.len(),
            reasons.join("; ")
        ))
    })?;
    Ok(GridResult { best, scores })
}

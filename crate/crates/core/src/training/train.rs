use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{class_weights, loss_coefficients, positive_probabilities, weighted_ce_on_tape};
use super::optim::AdamW;
use crate::error::{Error, Result};
use crate::graph::RelationalGraph;
use crate::metrics::f1_score;
use crate::models::{forward_on_tape, ModelKind, ModelParams};
use crate::tensor::{Matrix, Tape};

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub hidden_units: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-3,
            hidden_units: 16,
            max_epochs: 500,
            patience: 30,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.weight_decay.is_nan()
            || self.weight_decay < 0.0
        {
            return Err(Error::Config(format!(
                "learning rate must be positive and weight decay non-negative (got {}, {})",
                self.learning_rate, self.weight_decay
            )));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("max_epochs and patience must be positive".into()));
        }
        Ok(())
    }
}

/// When a run ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Early stopping on validation F1 with the configured patience; the
    /// best epoch's parameters are returned.
    Patience,
    /// Exactly this many epochs; the last parameters are returned.
    FixedEpochs(usize),
}

/// What [`EarlyStopping::observe`] concluded about an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

/// Patience bookkeeping. Only strict improvements reset the counter.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> Verdict {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.stale = 0;
            Verdict::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when no validation rows were given.
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_val_f1: Option<f64>,
    pub curve: Vec<EpochRecord>,
}

/// Inputs of one training run. Features are already normalized.
#[derive(Debug, Clone, Copy)]
pub struct TrainInputs<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [bool],
    /// Graph seen during gradient steps (R-GCN only).
    pub train_graph: Option<&'a RelationalGraph>,
    /// Graph used to score validation rows (R-GCN only).
    pub val_graph: Option<&'a RelationalGraph>,
    pub train_rows: &'a [usize],
    pub val_rows: &'a [usize],
}

/// Collusive-class probability for every row (inference mode).
pub fn predict_proba(params: &ModelParams, features: &Matrix, graph: Option<&RelationalGraph>) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logits = params.logits(features, graph, false, &mut rng)?;
    Ok(positive_probabilities(&logits))
}

/// Probabilities for `rows` only. Feedforward models skip other rows.
pub fn predict_rows(
    params: &ModelParams,
    features: &Matrix,
    graph: Option<&RelationalGraph>,
    rows: &[usize],
) -> Result<Vec<f64>> {
    match params.spec.kind {
        ModelKind::Ffn => predict_proba(params, &features.select_rows(rows), None),
        ModelKind::Rgcn => {
            let all = predict_proba(params, features, graph)?;
            Ok(rows.iter().map(|&r| all[r]).collect())
        }
    }
}

fn select(labels: &[bool], rows: &[usize]) -> Vec<bool> {
    rows.iter().map(|&r| labels[r]).collect()
}

/// Full-batch training with the weighted loss on `train_rows`.
pub fn train_model(
    init: ModelParams,
    inputs: &TrainInputs<'_>,
    config: &TrainConfig,
    stop: StopRule,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    if inputs.train_rows.is_empty() {
        return Err(Error::TrainingSetup("empty training mask".into()));
    }
    if stop == StopRule::Patience && inputs.val_rows.is_empty() {
        return Err(Error::TrainingSetup("early stopping needs validation rows".into()));
    }
    let train_labels = select(inputs.labels, inputs.train_rows);
    let weights = class_weights(&train_labels)?;
    let val_labels = select(inputs.labels, inputs.val_rows);

    // Feedforward rows are independent, so only training rows are fed.
    let ffn = init.spec.kind == ModelKind::Ffn;
    let (x_train, coef) = if ffn {
        let rows: Vec<usize> = (0..inputs.train_rows.len()).collect();
        let coef = loss_coefficients(rows.len(), &rows, &train_labels, &weights)?;
        (inputs.features.select_rows(inputs.train_rows), coef)
    } else {
        let coef = loss_coefficients(inputs.features.rows(), inputs.train_rows, inputs.labels, &weights)?;
        (inputs.features.clone(), coef)
    };

    let epochs = match stop {
        StopRule::Patience => config.max_epochs,
        StopRule::FixedEpochs(n) => n.max(1),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = AdamW::new(config.learning_rate, config.weight_decay);
    let mut params = init;
    let mut best = params.clone();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut curve = Vec::new();

    for epoch in 1..=epochs {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let logits = forward_on_tape(&params, &bound, &mut tape, &x_train, inputs.train_graph, true, &mut rng)?;
        let loss = weighted_ce_on_tape(&mut tape, logits, &coef)?;
        let train_loss = tape.value(loss).get(0, 0);
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let mut grads = tape.backward(loss)?;
        let grads: Vec<Matrix> = bound
            .vars()
            .into_iter()
            .map(|v| grads.take(v).expect("every parameter reaches the loss"))
            .collect();
        opt.step(&mut params.tensors_mut(), &grads)?;
        if !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        let val_f1 = if inputs.val_rows.is_empty() {
            None
        } else {
            let p = predict_rows(&params, inputs.features, inputs.val_graph, inputs.val_rows)?;
            Some(f1_score(&p, &val_labels))
        };
        curve.push(EpochRecord {
            epoch,
            train_loss,
            val_f1,
        });
        if stop == StopRule::Patience {
            match stopper.observe(epoch, val_f1.expect("checked above")) {
                Verdict::Improved => best = params.clone(),
                Verdict::Continue => {}
                Verdict::Stop => break,
            }
        }
    }

    Ok(match stop {
        StopRule::Patience => TrainOutcome {
            params: best,
            best_epoch: stopper.best_epoch(),
            best_val_f1: Some(stopper.best()),
            curve,
        },
        StopRule::FixedEpochs(_) => TrainOutcome {
            best_epoch: curve.len(),
            best_val_f1: curve.last().and_then(|r| r.val_f1),
            params,
            curve,
        },
    })
}

/// Writes `epoch,train_loss,val_f1` rows with a header.
pub fn write_training_curve<W: Write>(curve: &[EpochRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "val_f1"])?;
    for r in curve {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_f1.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

use crate::error::{Error, Result};
use crate::tensor::{softmax_rows, Matrix, Tape, Var, LOG_EPS};

/// Inverse-frequency class weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub theta_collusion: f64,
    pub theta_non_collusion: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights {
        theta_collusion: 1.0,
        theta_non_collusion: 1.0,
    };

    fn of(&self, label: bool) -> f64 {
        if label {
            self.theta_collusion
        } else {
            self.theta_non_collusion
        }
    }
}

/// `θ_c = 1/n_collusive`, `θ_n = 1/n_non_collusive` over the given labels.
pub fn class_weights(labels: &[bool]) -> Result<ClassWeights> {
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::TrainingSetup(format!(
            "training rows need both classes (collusive {pos}, non-collusive {neg})"
        )));
    }
    Ok(ClassWeights {
        theta_collusion: 1.0 / pos as f64,
        theta_non_collusion: 1.0 / neg as f64,
    })
}

/// Mean of `−θ_c·y·log ŷ − θ_n·(1−y)·log(1−ŷ)` with `ŷ` clamped below at
/// `1e-12`.
pub fn weighted_ce(probs: &[f64], labels: &[bool], w: &ClassWeights) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Contract("loss over an empty mask".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let q = if y { p } else { 1.0 - p };
            -w.of(y) * q.max(LOG_EPS).ln()
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// `m×2` matrix `C` such that `Σ C ∘ log softmax(logits)` is the weighted
/// loss averaged over `rows`.
pub fn loss_coefficients(node_count: usize, rows: &[usize], labels: &[bool], w: &ClassWeights) -> Result<Matrix> {
    if rows.is_empty() {
        return Err(Error::Contract("loss over an empty mask".into()));
    }
    let scale = 1.0 / rows.len() as f64;
    let mut c = Matrix::zeros(node_count, 2);
    for &r in rows {
        let y = labels[r];
        c.set(r, usize::from(y), -w.of(y) * scale);
    }
    Ok(c)
}

/// Records the weighted loss of `logits` given coefficients from
/// [`loss_coefficients`].
pub fn weighted_ce_on_tape(tape: &mut Tape, logits: Var, coefficients: &Matrix) -> Result<Var> {
    let p = tape.softmax_rows(logits);
    let lp = tape.log(p);
    let c = tape.constant(coefficients.clone());
    let weighted = tape.mul(lp, c)?;
    Ok(tape.sum(weighted))
}

/// Softmax probability of the collusive class per row.
pub fn positive_probabilities(logits: &Matrix) -> Vec<f64> {
    softmax_rows(logits).column(1)
}

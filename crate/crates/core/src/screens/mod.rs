//! Tender-level screening variables.
//!
//! Every statistic is computed from the bid values of a single tender. Sample
//! (n − 1) standard deviations are used throughout. Statistics that are not
//! defined for a tender (too few bids, zero spread) are reported as `0.0` and
//! the matching [`Undefined`] flag is raised, so the feature matrix stays dense
//! while degenerate tenders remain auditable.

use crate::error::{Error, Result};

/// Which statistics of a [`ScreenSet`] fell back to zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Undefined {
    pub cv: bool,
    pub diffp: bool,
    pub rd: bool,
    pub kurt: bool,
    pub skew: bool,
    pub kstest: bool,
    pub a2: bool,
}

impl Undefined {
    pub fn any(&self) -> bool {
        self.cv || self.diffp || self.rd || self.kurt || self.skew || self.kstest || self.a2
    }
}

/// Screening variables of one tender.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenSet {
    /// Number of bids.
    pub n: usize,
    pub mean_bid: f64,
    /// Sample standard deviation (0 when `n < 2`).
    pub std_dev: f64,
    /// Coefficient of variation.
    pub cv: f64,
    /// Relative spread between highest and lowest bid.
    pub spd: f64,
    /// Relative gap between the two lowest bids.
    pub diffp: f64,
    /// Gap between the two lowest bids over the std of the losing bids.
    pub rd: f64,
    /// Excess kurtosis.
    pub kurt: f64,
    pub skew: f64,
    /// Kolmogorov-Smirnov distance to a uniform on `[min, max]`.
    pub kstest: f64,
    /// Average bid (optionally trimmed).
    pub a1: f64,
    /// Average of bids below `a1`; 0 when undefined.
    pub a2: f64,
    pub undefined: Undefined,
}

/// Result of [`aba_averages`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbaAverages {
    pub a1: f64,
    /// `None` when no bid lies strictly below `a1`.
    pub a2: Option<f64>,
    /// Lowest bid strictly above `a2`.
    pub winner: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

fn sorted(bids: &[f64]) -> Vec<f64> {
    let mut s = bids.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Computes all screens for one tender with the default trim fraction of 0.
pub fn compute_screens(bids: &[f64]) -> Result<ScreenSet> {
    compute_screens_trimmed(bids, 0.0)
}

/// Computes all screens; `trim_fraction` only affects `a1`/`a2`.
pub fn compute_screens_trimmed(bids: &[f64], trim_fraction: f64) -> Result<ScreenSet> {
    if bids.is_empty() {
        return Err(Error::Contract("screens need at least one bid".into()));
    }
    if let Some(b) = bids.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::Contract(format!("bid values must be positive, got {b}")));
    }
    let n = bids.len();
    let nf = n as f64;
    let s = sorted(bids);
    let lo = s[0];
    let hi = s[n - 1];
    let m = mean(bids);
    let sd = sample_std(bids, m);
    let mut undefined = Undefined::default();

    let cv = if n >= 2 {
        sd / m
    } else {
        undefined.cv = true;
        0.0
    };

    let spd = (hi - lo) / lo;

    let (diffp, gap) = if n >= 2 {
        ((s[1] - lo) / lo, s[1] - lo)
    } else {
        undefined.diffp = true;
        (0.0, 0.0)
    };

    let losing = &s[1..];
    let losing_sd = sample_std(losing, if losing.is_empty() { 0.0 } else { mean(losing) });
    let rd = if losing.len() >= 2 && losing_sd > 0.0 {
        gap / losing_sd
    } else {
        undefined.rd = true;
        0.0
    };

    let z_power_sum = |p: i32| bids.iter().map(|b| ((b - m) / sd).powi(p)).sum::<f64>();

    let kurt = if n >= 4 && sd > 0.0 {
        nf * (nf + 1.0) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0)) * z_power_sum(4)
            - 3.0 * (nf - 1.0).powi(2) / ((nf - 2.0) * (nf - 3.0))
    } else {
        undefined.kurt = true;
        0.0
    };

    let skew = if n >= 3 && sd > 0.0 {
        nf / ((nf - 1.0) * (nf - 2.0)) * z_power_sum(3)
    } else {
        undefined.skew = true;
        0.0
    };

    let kstest = match kstest_uniform(bids) {
        Some(d) => d,
        None => {
            undefined.kstest = true;
            0.0
        }
    };

    let aba = aba_averages(bids, trim_fraction)?;
    let a2 = aba.a2.unwrap_or_else(|| {
        undefined.a2 = true;
        0.0
    });

    Ok(ScreenSet {
        n,
        mean_bid: m,
        std_dev: sd,
        cv,
        spd,
        diffp,
        rd,
        kurt,
        skew,
        kstest,
        a1: aba.a1,
        a2,
        undefined,
    })
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `bids` and the
/// uniform CDF on `[min, max]`. The supremum is taken at every sample point
/// from both sides of the empirical step. `None` for fewer than two bids or
/// when all bids are equal.
pub fn kstest_uniform(bids: &[f64]) -> Option<f64> {
    if bids.len() < 2 {
        return None;
    }
    let s = sorted(bids);
    let n = s.len() as f64;
    let (lo, hi) = (s[0], s[s.len() - 1]);
    if hi <= lo {
        return None;
    }
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = (x - lo) / (hi - lo);
        // right limit of the step: share of bids ≤ x; left limit: share < x
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    Some(d.clamp(0.0, 1.0))
}

/// Average-bid-auction averages. `a1` is the mean after dropping
/// `floor(trim_fraction · n)` bids from each end of the sorted list.
pub fn aba_averages(bids: &[f64], trim_fraction: f64) -> Result<AbaAverages> {
    if bids.is_empty() {
        return Err(Error::Contract("aba averages need at least one bid".into()));
    }
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::Config(format!(
            "trim fraction {trim_fraction} must lie in [0, 0.5)"
        )));
    }
    let s = sorted(bids);
    let cut = (trim_fraction * s.len() as f64).floor() as usize;
    let a1 = mean(&s[cut..s.len() - cut]);
    let below: Vec<f64> = s.iter().copied().filter(|&b| b < a1).collect();
    let a2 = (!below.is_empty()).then(|| mean(&below));
    let winner = a2.and_then(|a2| s.iter().copied().find(|&b| b > a2));
    Ok(AbaAverages { a1, a2, winner })
}

#[cfg(test)]
mod tests;

use indexmap::IndexMap;

use super::BidTable;
use crate::error::{Error, Result};
use crate::screens::{compute_screens, ScreenSet};
use crate::tensor::Matrix;

/// Training features, in column order.
pub const FEATURE_NAMES: [&str; 10] = [
    "Bid_value",
    "Number_bids",
    "Winner",
    "CV",
    "SPD",
    "DIFFP",
    "RD",
    "KURT",
    "SKEW",
    "KSTEST",
];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

/// Screens keyed by tender identifier.
pub type ScreenTable = IndexMap<String, ScreenSet>;

/// Per-bid feature matrix (`m × 10`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub matrix: Matrix,
}

impl FeatureMatrix {
    pub fn feature_names(&self) -> &'static [&'static str; FEATURE_COUNT] {
        &FEATURE_NAMES
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }
}

/// Screens for every tender of the table, in first-appearance order.
pub fn screens_by_tender(table: &BidTable) -> Result<ScreenTable> {
    let recs = table.records();
    table
        .tenders()
        .into_iter()
        .map(|(tender, rows)| {
            let bids: Vec<f64> = rows.iter().map(|&i| recs[i].bid_value).collect();
            Ok((tender.to_string(), compute_screens(&bids)?))
        })
        .collect()
}

/// Builds the raw (unnormalized) feature rows. Tender screens are broadcast to
/// every bid of the tender. With `prefer_supplied`, precomputed screen columns
/// from the input file replace the recomputed values where present.
pub fn assemble_features(table: &BidTable, screens: &ScreenTable, prefer_supplied: bool) -> Result<FeatureMatrix> {
    let counts: IndexMap<&str, usize> = table.tenders().into_iter().map(|(t, rows)| (t, rows.len())).collect();
    let mut m = Matrix::zeros(table.len(), FEATURE_COUNT);
    for (i, r) in table.records().iter().enumerate() {
        let s = screens
            .get(&r.tender_id)
            .ok_or_else(|| Error::Consistency(format!("no screens computed for tender '{}'", r.tender_id)))?;
        let computed = [s.cv, s.spd, s.diffp, s.rd, s.kurt, s.skew, s.kstest];
        let scr = match (prefer_supplied, r.supplied_screens) {
            (true, Some(sup)) => sup,
            _ => computed,
        };
        let row = m.row_mut(i);
        row[0] = r.bid_value;
        row[1] = counts[r.tender_id.as_str()] as f64;
        row[2] = if r.winner { 1.0 } else { 0.0 };
        row[3..].copy_from_slice(&scr);
    }
    Ok(FeatureMatrix { matrix: m })
}

/// Per-column min/max fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(m: &Matrix, fit_rows: &[usize]) -> Result<Self> {
        if fit_rows.is_empty() {
            return Err(Error::Contract("min-max scaling needs at least one fit row".into()));
        }
        let mut min = vec![f64::INFINITY; m.cols()];
        let mut max = vec![f64::NEG_INFINITY; m.cols()];
        for &r in fit_rows {
            for (c, &v) in m.row(r).iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(MinMaxScaler { min, max })
    }

    /// Scales into `[0, 1]`, clamping values outside the fitted range.
    /// Columns constant over the fit rows map to 0.
    pub fn transform(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let span = self.max[c] - self.min[c];
                *v = if span > 0.0 {
                    ((*v - self.min[c]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
        }
        out
    }
}

/// Min-max normalization fitted on `fit_rows` and applied to all rows.
pub fn minmax_normalize(fm: &FeatureMatrix, fit_rows: &[usize]) -> Result<FeatureMatrix> {
    let scaler = MinMaxScaler::fit(&fm.matrix, fit_rows)?;
    Ok(FeatureMatrix {
        matrix: scaler.transform(&fm.matrix),
    })
}

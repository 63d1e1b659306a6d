use std::io::Write;

use crate::error::Result;

/// One curve vertex. For ROC `x` is the false positive rate and `y` the true
/// positive rate; for PR `x` is recall and `y` precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// Cumulative `(score, tp, fp)` after each group of tied scores, in
/// descending score order.
fn cumulative(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    assert_eq!(scores.len(), labels.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group {
            out.push((scores[i], tp, fp));
        }
    }
    out
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y).count();
    (pos, labels.len() - pos)
}

/// ROC vertices from `(0,0)` to `(1,1)`, one per distinct score. `None` when
/// a class is absent.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Option<Vec<CurvePoint>> {
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut pts = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    pts.extend(cumulative(scores, labels).into_iter().map(|(s, tp, fp)| CurvePoint {
        threshold: s,
        x: fp as f64 / neg as f64,
        y: tp as f64 / pos as f64,
    }));
    Some(pts)
}

/// Trapezoidal area under the ROC curve; equals the probability that a
/// random positive outscores a random negative, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pts = roc_curve(scores, labels)?;
    Some(
        pts.windows(2)
            .map(|w| (w[1].x - w[0].x) * (w[1].y + w[0].y) / 2.0)
            .sum(),
    )
}

/// `(recall, precision)` per distinct score, descending threshold. `None`
/// without positives.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Option<Vec<CurvePoint>> {
    let (pos, _) = class_counts(labels);
    if pos == 0 {
        return None;
    }
    Some(
        cumulative(scores, labels)
            .into_iter()
            .map(|(s, tp, fp)| CurvePoint {
                threshold: s,
                x: tp as f64 / pos as f64,
                y: tp as f64 / (tp + fp) as f64,
            })
            .collect(),
    )
}

/// Average precision: `Σ (R_i − R_{i−1}) · P_i` with `R_0 = 0`.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pts = pr_curve(scores, labels)?;
    let mut prev = 0.0;
    let mut area = 0.0;
    for p in pts {
        area += (p.x - prev) * p.y;
        prev = p.x;
    }
    Some(area)
}

/// Writes `threshold,x,y` rows with a header.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "x", "y"])?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

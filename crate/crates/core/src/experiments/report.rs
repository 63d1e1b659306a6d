//! Result tables: a machine-readable CSV and a text table in
//! `Mean (SD)` form.
//!
//! In the text table `*` marks the better model of a dataset for each
//! metric, `—` an undefined value and `†` a model that labeled every bid
//! non-collusive (precision 1, recall 0).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::phase1::PhaseIResult;
use super::phase2::PhaseIIResult;
use crate::error::{Error, Result};
use crate::metrics::{Metric, RunAggregate, Summary};
use crate::models::ModelKind;

/// Aggregated results of one (dataset, model) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Dataset name, or `source->target` for transfers.
    pub dataset: String,
    pub model: ModelKind,
    pub aggregate: RunAggregate,
}

impl From<&PhaseIResult> for ResultRow {
    fn from(r: &PhaseIResult) -> Self {
        ResultRow {
            dataset: r.dataset.clone(),
            model: r.model,
            aggregate: r.aggregate.clone(),
        }
    }
}

impl From<&PhaseIIResult> for ResultRow {
    fn from(r: &PhaseIIResult) -> Self {
        ResultRow {
            dataset: format!("{}->{}", r.source, r.target),
            model: r.model,
            aggregate: r.aggregate.clone(),
        }
    }
}

impl ResultRow {
    /// Precision 1 with recall 0.
    pub fn dagger(&self) -> bool {
        let mean = |m| self.aggregate.get(m).map(|s: Summary| s.mean);
        mean(Metric::Precision) == Some(1.0) && mean(Metric::Recall) == Some(0.0)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    dataset: String,
    model: String,
    metric: String,
    mean: Option<f64>,
    sd: Option<f64>,
    n: usize,
    attempted: usize,
    failed: usize,
    all_negative: usize,
}

/// One line per (dataset, model, headline metric).
pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        for m in Metric::HEADLINE {
            let s = row.aggregate.get(m);
            w.serialize(CsvRow {
                dataset: row.dataset.clone(),
                model: row.model.name().into(),
                metric: m.name().into(),
                mean: s.map(|s| s.mean),
                sd: s.and_then(|s| s.sd),
                n: s.map_or(0, |s| s.n),
                attempted: row.aggregate.attempted,
                failed: row.aggregate.failed,
                all_negative: row.aggregate.all_negative,
            })?;
        }
    }
    w.flush().map_err(|e| Error::Data(format!("writing results: {e}")))?;
    Ok(())
}

/// Reads rows written by [`write_results_csv`], keeping first-seen order.
pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut rows: Vec<ResultRow> = Vec::new();
    for (i, rec) in csv::Reader::from_reader(reader).deserialize::<CsvRow>().enumerate() {
        let rec = rec?;
        let bad = |message: String| Error::Row { row: i + 2, message };
        let model: ModelKind = rec.model.parse()?;
        let metric = Metric::ALL
            .into_iter()
            .find(|m| m.name() == rec.metric)
            .ok_or_else(|| bad(format!("unknown metric '{}'", rec.metric)))?;
        let summary = match rec.mean {
            Some(mean) => Some(Summary {
                mean,
                sd: rec.sd,
                n: rec.n,
            }),
            None => None,
        };
        let idx = match rows.iter().position(|r| r.dataset == rec.dataset && r.model == model) {
            Some(idx) => idx,
            None => {
                rows.push(ResultRow {
                    dataset: rec.dataset.clone(),
                    model,
                    aggregate: RunAggregate {
                        attempted: rec.attempted,
                        failed: rec.failed,
                        all_negative: rec.all_negative,
                        metrics: Metric::ALL.iter().map(|&m| (m, None)).collect(),
                    },
                });
                rows.len() - 1
            }
        };
        let slot = rows[idx]
            .aggregate
            .metrics
            .iter_mut()
            .find(|(m, _)| *m == metric)
            .expect("every metric has a slot");
        slot.1 = summary;
    }
    Ok(rows)
}

fn cell(s: Option<Summary>) -> String {
    match s {
        None => "—".into(),
        Some(Summary { mean, sd: Some(sd), .. }) => format!("{mean:.2} ({sd:.2})"),
        Some(Summary { mean, sd: None, .. }) => format!("{mean:.2}"),
    }
}

/// Text table grouped by dataset, one line per model.
pub fn render_table(rows: &[ResultRow]) -> String {
    let mut groups: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(&r.dataset).or_default().push(r);
    }
    let width = 16;
    let mut out = String::new();
    let _ = write!(out, "{:<24}{:<8}", "Dataset", "Model");
    for m in Metric::HEADLINE {
        let _ = write!(out, "{:<width$}", m.label());
    }
    out.push('\n');

    for (dataset, members) in groups {
        let best: Vec<Option<f64>> = Metric::HEADLINE
            .iter()
            .map(|&m| {
                let means: Vec<f64> = members
                    .iter()
                    .filter_map(|r| r.aggregate.get(m))
                    .map(|s| s.mean)
                    .collect();
                (means.len() >= 2).then(|| means.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            })
            .collect();
        for (i, r) in members.iter().enumerate() {
            let name = if i == 0 { dataset } else { "" };
            let _ = write!(out, "{name:<24}{:<8}", r.model.name());
            for (k, &m) in Metric::HEADLINE.iter().enumerate() {
                let s = r.aggregate.get(m);
                let mut text = cell(s);
                if matches!((s, best[k]), (Some(s), Some(b)) if s.mean == b) {
                    text.push('*');
                }
                if m == Metric::Precision && r.dagger() {
                    text.push('†');
                }
                let _ = write!(out, "{text:<width$}");
            }
            let failed = r.aggregate.failed;
            if failed > 0 {
                let _ = write!(out, "({failed} of {} runs failed)", r.aggregate.attempted);
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
    }
    out.push_str(
        "\nMean (SD) over runs. * best per dataset and metric; — undefined; † all bids labeled non-collusive.\n",
    );
    out
}

/// Writes `results.csv` and `report.txt` into `dir`.
pub fn render_report(rows: &[ResultRow], dir: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("a report needs at least one result".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("results.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_results_csv(rows, file)?;
    let txt = dir.join("report.txt");
    fs::write(&txt, render_table(rows)).map_err(|e| Error::io(&txt, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{aggregate_runs, RunMetrics};

    fn row(dataset: &str, model: ModelKind, runs: &[(&[f64], &[bool])]) -> ResultRow {
        let metrics: Vec<Option<RunMetrics>> = runs.iter().map(|(s, l)| Some(RunMetrics::evaluate(s, l))).collect();
        ResultRow {
            dataset: dataset.into(),
            model,
            aggregate: aggregate_runs(&metrics),
        }
    }

    fn pair() -> Vec<ResultRow> {
        let labels: &[bool] = &[true, false, true, false];
        vec![
            row(
                "alpha",
                ModelKind::Ffn,
                &[(&[0.9, 0.6, 0.4, 0.1], labels), (&[0.8, 0.2, 0.3, 0.1], labels)],
            ),
            row(
                "alpha",
                ModelKind::Rgcn,
                &[(&[0.9, 0.1, 0.8, 0.2], labels), (&[0.7, 0.3, 0.6, 0.4], labels)],
            ),
        ]
    }

    #[test]
    fn two_models_give_eight_csv_rows() {
        let mut buf = Vec::new();
        write_results_csv(&pair(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert!(text.starts_with("dataset,model,metric,mean,sd,n,attempted,failed,all_negative"));
    }

    #[test]
    fn csv_round_trips_headline_metrics() {
        let rows = pair();
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf).unwrap();
        let back = read_results_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!((&a.dataset, a.model), (&b.dataset, b.model));
            for m in Metric::HEADLINE {
                assert_eq!(a.aggregate.get(m), b.aggregate.get(m), "{m:?}");
            }
        }
    }

    #[test]
    fn unknown_metric_is_a_row_error() {
        let text = "dataset,model,metric,mean,sd,n,attempted,failed,all_negative\nx,nn,bogus,1,0,1,1,0,0\n";
        assert!(matches!(
            read_results_csv(text.as_bytes()),
            Err(Error::Row { row: 2, .. })
        ));
    }

    #[test]
    fn best_model_is_starred() {
        let table = render_table(&pair());
        let rgcn = table.lines().find(|l| l.contains("rgcn")).unwrap();
        let nn = table.lines().find(|l| l.contains("nn ")).unwrap();
        // the relational model separates both runs perfectly
        assert!(rgcn.starts_with("        ") && rgcn.contains("1.00 (0.00)*"));
        assert!(!nn.contains('*'));
    }

    #[test]
    fn undefined_and_all_negative_cells_are_marked() {
        let rows = vec![
            row("beta", ModelKind::Ffn, &[(&[0.1, 0.2], &[true, false])]),
            row("gamma", ModelKind::Ffn, &[(&[0.9, 0.1], &[true, false])]),
        ];
        let mut rows = rows;
        // an all-negative model under the transfer convention
        let m = RunMetrics::evaluate(&[0.1, 0.2], &[true, false]).with_all_negative_precision();
        rows[0].aggregate = aggregate_runs(&[Some(m)]);
        rows[1].aggregate = aggregate_runs(&[None]);
        let table = render_table(&rows);
        let beta = table.lines().find(|l| l.starts_with("beta")).unwrap();
        let gamma = table.lines().find(|l| l.starts_with("gamma")).unwrap();
        assert!(beta.contains("1.00†"), "{beta}");
        assert!(gamma.contains('—') && gamma.contains("(1 of 1 runs failed)"), "{gamma}");
        assert!(table.contains("† all bids labeled non-collusive"));
    }

    #[test]
    fn report_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        render_report(&pair(), dir.path()).unwrap();
        assert!(dir.path().join("results.csv").is_file());
        let txt = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert_eq!(txt, render_table(&pair()));
        assert!(matches!(render_report(&[], dir.path()), Err(Error::Config(_))));
    }
}

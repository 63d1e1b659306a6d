use rayon::prelude::*;

use crate::dataio::{assemble_features, screens_by_tender, BidTable};
use crate::error::{Error, Result};
use crate::graph::{build_graph, RelationKind, RelationalGraph, SelfLoopMode};
use crate::metrics::{aggregate_runs, pr_curve, roc_curve, CurvePoint, RunAggregate, RunMetrics};
use crate::models::{Checkpoint, Decomposition, ModelKind, ModelSpec};
use crate::tensor::Matrix;
use crate::training::{
    company_split, derive_seed, fit, grid_search, predict_rows, CompanyIndex, EpochRecord, FinalFit, GridResult,
    GridSpec, Partition, Problem, Protocol, StopRule, TrainConfig, MIN_COMPANIES_PER_CLASS,
};

/// A table with its raw features and company index.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub table: BidTable,
    /// Unnormalized features, one row per bid.
    pub features: Matrix,
    pub labels: Vec<bool>,
    pub companies: CompanyIndex,
    pub available: Vec<RelationKind>,
}

impl Prepared {
    /// With `prefer_supplied`, screen columns present in the input replace
    /// recomputed screens.
    pub fn new(table: BidTable, prefer_supplied: bool) -> Result<Self> {
        let screens = screens_by_tender(&table)?;
        let features = assemble_features(&table, &screens, prefer_supplied)?.matrix;
        Ok(Prepared {
            labels: table.labels(),
            companies: CompanyIndex::from_table(&table),
            available: RelationKind::available_in(&table),
            features,
            table,
        })
    }

    pub fn name(&self) -> &str {
        self.table.name()
    }
}

/// Settings shared by Phase I runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOptions {
    pub runs: usize,
    pub base_seed: u64,
    pub grid: GridSpec,
    pub protocol: Protocol,
    pub decomposition: Decomposition,
    pub self_loops: SelfLoopMode,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions {
            runs: 10,
            base_seed: 42,
            grid: GridSpec::default(),
            protocol: Protocol::default(),
            decomposition: Decomposition::Full,
            self_loops: SelfLoopMode::PerRelation,
        }
    }
}

/// Everything a successful run produced.
#[derive(Debug, Clone)]
pub struct RunSuccess {
    pub config: TrainConfig,
    pub grid: GridResult,
    pub metrics: RunMetrics,
    pub curve: Vec<EpochRecord>,
    pub roc: Option<Vec<CurvePoint>>,
    pub pr: Option<Vec<CurvePoint>>,
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    /// The error message of a failed run.
    pub outcome: std::result::Result<RunSuccess, String>,
}

#[derive(Debug, Clone)]
pub struct PhaseIResult {
    pub dataset: String,
    pub model: ModelKind,
    pub relations: Vec<RelationKind>,
    pub runs: Vec<RunRecord>,
    pub aggregate: RunAggregate,
}

impl PhaseIResult {
    pub fn checkpoints(&self) -> Vec<&Checkpoint> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .map(|s| &s.checkpoint)
            .collect()
    }
}

fn check_company_classes(companies: &CompanyIndex) -> Result<()> {
    let pos = companies.collusive.iter().filter(|&&c| c).count();
    let neg = companies.len() - pos;
    if pos < MIN_COMPANIES_PER_CLASS || neg < MIN_COMPANIES_PER_CLASS {
        return Err(Error::Split(format!(
            "{pos} collusive and {neg} non-collusive companies; at least {MIN_COMPANIES_PER_CLASS} of each are needed"
        )));
    }
    Ok(())
}

/// Architecture for `kind` with `relations` (ignored for the feedforward
/// model).
pub fn model_spec(kind: ModelKind, relations: &[RelationKind], opts: &PhaseOptions) -> ModelSpec {
    match kind {
        ModelKind::Ffn => ModelSpec::ffn(16),
        ModelKind::Rgcn => ModelSpec::rgcn(16, relations)
            .with_decomposition(opts.decomposition)
            .with_self_loops(opts.self_loops),
    }
}

/// Within-dataset evaluation: each run draws a company split, grid-searches
/// on train+val with company-level folds, refits the winner and scores the
/// test companies.
pub fn run_phase1(
    data: &Prepared,
    kind: ModelKind,
    relations: &[RelationKind],
    opts: &PhaseOptions,
) -> Result<PhaseIResult> {
    if opts.runs == 0 {
        return Err(Error::Config("runs must be positive".into()));
    }
    check_company_classes(&data.companies)?;
    let spec = model_spec(kind, relations, opts);
    spec.validate()?;
    let graph = match kind {
        ModelKind::Ffn => None,
        ModelKind::Rgcn => Some(build_graph(&data.table, &spec.relations, opts.self_loops)?),
    };
    let problem = Problem {
        features: &data.features,
        labels: &data.labels,
        graph: graph.as_ref(),
        companies: &data.companies,
        model: &spec,
    };
    let grid = opts.grid.configs(&opts.protocol.base);
    if grid.is_empty() {
        return Err(Error::Config("the hyperparameter grid is empty".into()));
    }

    let runs: Vec<RunRecord> = (0..opts.runs)
        .into_par_iter()
        .map(|index| {
            let seed = opts.base_seed.wrapping_add(index as u64);
            let outcome = single_run(data, &problem, graph.as_ref(), &grid, opts, seed).map_err(|e| e.to_string());
            RunRecord { index, seed, outcome }
        })
        .collect();
    let metrics: Vec<Option<RunMetrics>> = runs
        .iter()
        .map(|r| r.outcome.as_ref().ok().map(|s| s.metrics.clone()))
        .collect();
    Ok(PhaseIResult {
        dataset: data.name().to_string(),
        model: kind,
        relations: spec.relations.clone(),
        aggregate: aggregate_runs(&metrics),
        runs,
    })
}

fn single_run(
    data: &Prepared,
    problem: &Problem<'_>,
    graph: Option<&RelationalGraph>,
    grid: &[TrainConfig],
    opts: &PhaseOptions,
    seed: u64,
) -> Result<RunSuccess> {
    let split = company_split(&data.companies, derive_seed(seed, 1))?;
    let train = split.rows_in(Partition::Train);
    let val = split.rows_in(Partition::Val);
    let test = split.rows_in(Partition::Test);
    let mut cv: Vec<usize> = train.iter().chain(&val).copied().collect();
    cv.sort_unstable();

    let search = grid_search(problem, &cv, grid, &opts.protocol, derive_seed(seed, 2))?;
    let (val_rows, stop) = match opts.protocol.final_fit {
        FinalFit::ValidationStopping => (val.as_slice(), StopRule::Patience),
        FinalFit::FixedEpochs => (&[][..], StopRule::FixedEpochs(search.best_epoch_estimate())),
    };
    let fitted = fit(
        problem,
        &search.best,
        &cv,
        val_rows,
        &opts.protocol,
        stop,
        derive_seed(seed, 3),
    )?;

    let scores = predict_rows(&fitted.outcome.params, &fitted.features, graph, &test)?;
    let labels: Vec<bool> = test.iter().map(|&r| data.labels[r]).collect();
    Ok(RunSuccess {
        config: search.best,
        metrics: RunMetrics::evaluate(&scores, &labels),
        roc: roc_curve(&scores, &labels),
        pr: pr_curve(&scores, &labels),
        curve: fitted.outcome.curve.clone(),
        checkpoint: Checkpoint {
            params: fitted.outcome.params,
            source: data.name().to_string(),
            source_relations: data.available.clone(),
        },
        grid: search,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{generate_synthetic, SynthConfig};

    fn data(cfg: SynthConfig) -> Prepared {
        Prepared::new(generate_synthetic(&cfg).unwrap(), false).unwrap()
    }

    fn quick() -> PhaseOptions {
        let mut opts = PhaseOptions {
            runs: 2,
            grid: GridSpec {
                learning_rates: vec![1e-2],
                weight_decays: vec![1e-3],
                hidden_units: vec![8],
            },
            ..PhaseOptions::default()
        };
        opts.protocol.base.max_epochs = 15;
        opts.protocol.base.patience = 5;
        opts
    }

    fn small() -> SynthConfig {
        SynthConfig {
            n_tenders: 120,
            locations: 40,
            sites: 120,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn runs_are_reproducible_and_complete() {
        let d = data(small());
        let rels = d.available.clone();
        let a = run_phase1(&d, ModelKind::Rgcn, &rels, &quick()).unwrap();
        let b = run_phase1(&d, ModelKind::Rgcn, &rels, &quick()).unwrap();
        assert_eq!(a.aggregate, b.aggregate);
        assert_eq!(a.aggregate.attempted, 2);
        assert_eq!(a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![42, 43]);
        assert_eq!(a.checkpoints().len(), 2 - a.aggregate.failed);
        for ck in a.checkpoints() {
            assert_eq!(ck.source, d.name());
            assert_eq!(ck.params.spec.relations, rels);
        }
    }

    #[test]
    fn test_rows_belong_to_unseen_companies() {
        let d = data(small());
        let r = run_phase1(&d, ModelKind::Ffn, &[], &quick()).unwrap();
        let s = r.runs[0].outcome.as_ref().unwrap();
        let split = company_split(&d.companies, derive_seed(42, 1)).unwrap();
        assert_eq!(s.metrics.confusion.total(), split.rows_in(Partition::Test).len());
    }

    #[test]
    fn too_few_colluding_companies_is_a_split_error() {
        let d = data(SynthConfig {
            cartel_size: 3,
            ..small()
        });
        let err = run_phase1(&d, ModelKind::Ffn, &[], &quick()).unwrap_err();
        assert!(matches!(err, Error::Split(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn zero_runs_or_empty_grid_are_config_errors() {
        let d = data(small());
        let none = PhaseOptions { runs: 0, ..quick() };
        assert!(matches!(
            run_phase1(&d, ModelKind::Ffn, &[], &none),
            Err(Error::Config(_))
        ));
        let mut empty = quick();
        empty.grid.hidden_units.clear();
        assert!(matches!(
            run_phase1(&d, ModelKind::Ffn, &[], &empty),
            Err(Error::Config(_))
        ));
    }
}

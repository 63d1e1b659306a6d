use rayon::prelude::*;

use super::phase1::Prepared;
use crate::dataio::{MinMaxScaler, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::graph::{build_graph, RelationKind};
use crate::metrics::{aggregate_runs, RunAggregate, RunMetrics};
use crate::models::{Checkpoint, ModelKind};
use crate::training::predict_proba;

/// Source datasets offering fewer relations than this are excluded from
/// transfer unless explicitly allowed.
pub const MIN_SOURCE_RELATIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransferOptions {
    /// Accept models from sources with a single relation kind.
    pub allow_single_relation_sources: bool,
}

#[derive(Debug, Clone)]
pub struct PhaseIIResult {
    pub source: String,
    pub target: String,
    pub model: ModelKind,
    /// Relations the target graph was built with (R-GCN only).
    pub relations: Vec<RelationKind>,
    /// Per-checkpoint metrics on the complete target dataset.
    pub per_model: Vec<RunMetrics>,
    pub aggregate: RunAggregate,
}

impl PhaseIIResult {
    /// Every model labeled all target bids non-collusive.
    pub fn all_negative(&self) -> bool {
        self.aggregate.all_negative_flag()
    }
}

/// Relations a model can use on a target: its own intersected with what the
/// target offers.
pub fn transfer_relations(model: &[RelationKind], target: &[RelationKind]) -> Vec<RelationKind> {
    model.iter().copied().filter(|k| target.contains(k)).collect()
}

/// Zero-shot evaluation of trained models on every row of another dataset.
/// Target features are scaled with min/max taken over the whole target.
/// Checkpoints are only read. Models that predict no positives report
/// precision 1 and recall 0.
pub fn run_phase2(checkpoints: &[Checkpoint], target: &Prepared, opts: &TransferOptions) -> Result<PhaseIIResult> {
    let first = checkpoints
        .first()
        .ok_or_else(|| Error::Config("transfer needs at least one checkpoint".into()))?;
    let spec = &first.params.spec;
    for ck in checkpoints {
        if ck.source != first.source || ck.params.spec != *spec {
            return Err(Error::Consistency(format!(
                "checkpoints mix sources or architectures ('{}' {} vs '{}' {})",
                first.source, spec.kind, ck.source, ck.params.spec.kind
            )));
        }
    }
    if first.source == target.name() {
        return Err(Error::Incompatible(format!(
            "source and target are both '{}'; transfer needs a different dataset",
            target.name()
        )));
    }
    if first.source_relations.len() < MIN_SOURCE_RELATIONS && !opts.allow_single_relation_sources {
        return Err(Error::Incompatible(format!(
            "source '{}' offers only {} relation kind(s); enable single-relation sources to transfer it anyway",
            first.source,
            first.source_relations.len()
        )));
    }
    if spec.input_dim != FEATURE_COUNT {
        return Err(Error::Incompatible(format!(
            "model expects {} features, targets provide {FEATURE_COUNT}",
            spec.input_dim
        )));
    }

    let (graph, relations) = match spec.kind {
        ModelKind::Ffn => (None, Vec::new()),
        ModelKind::Rgcn => {
            let common = transfer_relations(&spec.relations, &target.available);
            if common.is_empty() {
                return Err(Error::Incompatible(format!(
                    "model relations [{}] share nothing with target '{}' [{}]",
                    names(&spec.relations),
                    target.name(),
                    names(&target.available)
                )));
            }
            (Some(build_graph(&target.table, &common, spec.self_loops)?), common)
        }
    };

    let all: Vec<usize> = (0..target.features.rows()).collect();
    let features = MinMaxScaler::fit(&target.features, &all)?.transform(&target.features);
    let per_model: Vec<RunMetrics> = checkpoints
        .par_iter()
        .map(|ck| {
            let scores = predict_proba(&ck.params, &features, graph.as_ref())?;
            Ok(RunMetrics::evaluate(&scores, &target.labels).with_all_negative_precision())
        })
        .collect::<Result<_>>()?;
    let runs: Vec<Option<RunMetrics>> = per_model.iter().cloned().map(Some).collect();

    Ok(PhaseIIResult {
        source: first.source.clone(),
        target: target.name().to_string(),
        model: spec.kind,
        relations,
        aggregate: aggregate_runs(&runs),
        per_model,
    })
}

fn names(kinds: &[RelationKind]) -> String {
    kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
}

use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::phase1::PhaseOptions;
use super::phase2::TransferOptions;
use super::synth::SynthConfig;
use crate::dataio::Schema;
use crate::error::{Error, Result};
use crate::graph::{parse_relations, RelationKind, SelfLoopMode};
use crate::models::Decomposition;
use crate::training::{FinalFit, GraphMode, GridSpec, NormalizationScope, Protocol, TrainConfig};

/// Run settings read from a TOML file. Every key is optional.
///
/// ```toml
/// runs = 10
/// seed = 42
/// folds = 3
/// max_epochs = 500
/// patience = 30
/// normalization = "training-rows"   # or "all-rows"
/// graph_mode = "transductive"       # or "inductive"
/// final_fit = "validation-stopping" # or "fixed-epochs"
/// self_loops = "per-relation"       # or "shared"
/// decomposition = "full"            # "basis 2", "diagonal"
/// relations = ["tender", "competitor"]
///
/// [grid]
/// learning_rates = [1e-2, 1e-3]
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub runs: usize,
    pub seed: u64,
    pub folds: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub normalization: String,
    pub graph_mode: String,
    pub final_fit: String,
    pub self_loops: String,
    pub decomposition: String,
    /// R-GCN relations; all the dataset offers when absent.
    pub relations: Option<Vec<String>>,
    pub prefer_supplied_screens: bool,
    pub allow_single_relation_sources: bool,
    pub grid: GridConfig,
    pub schema: Schema,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub hidden_units: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        GridConfig {
            learning_rates: g.learning_rates,
            weight_decays: g.weight_decays,
            hidden_units: g.hidden_units,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = TrainConfig::default();
        RunConfig {
            runs: 10,
            seed: 42,
            folds: 3,
            max_epochs: base.max_epochs,
            patience: base.patience,
            normalization: "training-rows".into(),
            graph_mode: "transductive".into(),
            final_fit: "validation-stopping".into(),
            self_loops: "per-relation".into(),
            decomposition: "full".into(),
            relations: None,
            prefer_supplied_screens: false,
            allow_single_relation_sources: false,
            grid: GridConfig::default(),
            schema: Schema::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("{key} must be one of {names:?}, got '{value}'"))
        })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.phase_options()?;
        cfg.relation_kinds()?;
        cfg.synth.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Explicit relation list, if any.
    pub fn relation_kinds(&self) -> Result<Option<Vec<RelationKind>>> {
        self.relations
            .as_ref()
            .map(|names| parse_relations(&names.join(",")))
            .transpose()
    }

    pub fn phase_options(&self) -> Result<PhaseOptions> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        let base = TrainConfig {
            max_epochs: self.max_epochs,
            patience: self.patience,
            ..TrainConfig::default()
        };
        base.validate()?;
        let grid = GridSpec {
            learning_rates: self.grid.learning_rates.clone(),
            weight_decays: self.grid.weight_decays.clone(),
            hidden_units: self.grid.hidden_units.clone(),
        };
        for config in grid.configs(&base) {
            config.validate()?;
        }
        let protocol = Protocol {
            normalization: choice(
                "normalization",
                &self.normalization,
                &[
                    ("training-rows", NormalizationScope::TrainingRows),
                    ("all-rows", NormalizationScope::AllRows),
                ],
            )?,
            graph_mode: choice(
                "graph_mode",
                &self.graph_mode,
                &[
                    ("transductive", GraphMode::Transductive),
                    ("inductive", GraphMode::Inductive),
                ],
            )?,
            final_fit: choice(
                "final_fit",
                &self.final_fit,
                &[
                    ("validation-stopping", FinalFit::ValidationStopping),
                    ("fixed-epochs", FinalFit::FixedEpochs),
                ],
            )?,
            folds: self.folds,
            base,
        };
        let self_loops: SelfLoopMode = self.self_loops.parse()?;
        let decomposition: Decomposition = self.decomposition.parse()?;
        Ok(PhaseOptions {
            runs: self.runs,
            base_seed: self.seed,
            grid,
            protocol,
            decomposition,
            self_loops,
        })
    }

    pub fn transfer_options(&self) -> TransferOptions {
        TransferOptions {
            allow_single_relation_sources: self.allow_single_relation_sources,
        }
    }
}

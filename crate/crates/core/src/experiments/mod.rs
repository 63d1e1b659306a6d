//! Within-dataset evaluation, zero-shot transfer, synthetic data and reports.

mod config;
mod phase1;
mod phase2;
mod report;
mod synth;

pub use config::{GridConfig, RunConfig};
pub use phase1::{model_spec, run_phase1, PhaseIResult, PhaseOptions, Prepared, RunRecord, RunSuccess};
pub use phase2::{run_phase2, transfer_relations, PhaseIIResult, TransferOptions, MIN_SOURCE_RELATIONS};
pub use report::{read_results_csv, render_report, render_table, write_results_csv, ResultRow};
pub use synth::{generate_synthetic, SynthConfig};

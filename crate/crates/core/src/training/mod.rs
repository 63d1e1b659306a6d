//! Loss, company-level splitting, optimization, early stopping and
//! cross-validated grid search.

mod grid;
mod loss;
mod optim;
mod split;
mod train;

pub use grid::{
    derive_seed, fit, grid_search, rank, select_best, ConfigScore, FinalFit, Fit, GraphMode, GridResult, GridSpec,
    NormalizationScope, Problem, Protocol,
};
pub use loss::{
    class_weights, loss_coefficients, positive_probabilities, weighted_ce, weighted_ce_on_tape, ClassWeights,
};
pub use optim::AdamW;
pub use split::{
    company_folds, company_split, split_sizes, CompanyIndex, Fold, Partition, SplitAssignment, MIN_COMPANIES_PER_CLASS,
};
pub use train::{
    predict_proba, predict_rows, train_model, write_training_curve, EarlyStopping, EpochRecord, StopRule, TrainConfig,
    TrainInputs, TrainOutcome, Verdict,
};

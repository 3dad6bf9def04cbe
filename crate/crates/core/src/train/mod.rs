//! Optimization loop, gradient clipping, and random hyperparameter search.

pub mod adam;
pub mod clip;
pub mod search;
pub mod trainer;

pub use adam::Adam;
pub use clip::clip_gradients;
pub use search::{
    read_ledger, sample_hyperparams, sample_loguniform, select_winner, write_ledger,
    hyperparameter_search_with, run_search, SearchConfig, SearchOutcome,
};
pub use trainer::{train, CurvePoint, HyperParams, TrainSchedule, TrialResult, TrialStatus};

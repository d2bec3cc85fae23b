//! Training loop, optimizer, negative sampling and grid search.

mod adam;
mod sampler;
mod stopping;
mod trainer;
mod tuner;

pub use adam::Adam;
pub use sampler::sample_negatives;
pub use stopping::{Decision, EarlyStopping};
pub use trainer::{train, LogRecord, TrainOptions, TrainOutcome, TrainState};
pub use tuner::{grid_search, tune, TrialRecord, TuneOutcome};

//! The graph substitution model, its training loop and checkpoints.

mod checkpoint;
mod config;
mod gismo;
mod train;

pub use checkpoint::{Manifest, TensorEntry};
pub use config::{ContextMode, GismoConfig};
pub use gismo::{GinLayer, Gismo, GismoParameters, Linear, PreparedScorer, ScoredTuple};
pub use train::{fit, sample_negatives, train_epoch, write_training_log, EpochRecord, EpochStats, FitOutcome};

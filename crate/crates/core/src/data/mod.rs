//! Load profiles, calendar features, scaling and dataset assembly.

mod dataset;
mod features;
mod profile;
mod scaler;
mod synth;

use thiserror::Error;

pub use dataset::{assemble_dataset, Scenario, ScenarioKind, SupervisedDataset};
pub use features::{build_features, FeatureMap};
pub use profile::{LoadProfile, ProfileSource, SLOTS_PER_DAY, SLOT_HOURS};
pub use scaler::{FittedScalers, MinMaxScaler};
pub use synth::{synthesize_profile, synthesize_profile_with, SynthConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("line {line}, column `{column}`: {message}")]
    Parse {
        line: usize,
        column: &'static str,
        message: String,
    },
    #[error("line {line}: cadence gap, expected {expected}")]
    CadenceGap { line: usize, expected: String },
    #[error("incomplete day {date}: {found} of 96 quarter-hours")]
    PartialDay { date: String, found: usize },
    #[error("timestamp {0} is not on the 15-minute grid")]
    OffGrid(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

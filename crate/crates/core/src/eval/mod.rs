//! Error metrics, the month × scenario table and hyperparameter search.

mod grid;
mod metrics;
mod table;

use thiserror::Error;

use crate::data::{DataError, ScenarioKind};
use crate::svr::SvrError;

pub use grid::{grid_search, GridContext, GridObjective, GridPoint, GridSearchResult, GridSearchSpec};
pub use metrics::{mape, mse, MapeMode};
pub use table::{
    evaluate_cell, run_table_cells, run_table_experiment, CellInput, EvalReport, ReportRow, ReportSummary,
    TableOptions, DEFAULT_MONTHS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("no values to compare")]
    Empty,
    #[error("non-finite value in metric input")]
    NonFinite,
    #[error("target {index} is zero; relative error is undefined")]
    ZeroTarget { index: usize },
    #[error("month {month}, scenario {scenario}: {message}")]
    Cell {
        month: u32,
        scenario: ScenarioKind,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Svr(#[from] SvrError),
}

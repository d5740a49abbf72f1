//! ν-support-vector regression.
//!
//! Training solves the dual
//!
//! ```text
//! min  ½ βᵀKβ − tᵀβ        β = α − α*
//! s.t. Σβ = 0,  Σ(α + α*) ≤ Cν,  0 ≤ α, α* ≤ C/N
//! ```
//!
//! with a two-variable working-set solver, and predictions use
//! `f(x) = Σ β_i K(s_i, x) + b`.

mod kernel;
mod model;
mod oracle;
mod solver;

use thiserror::Error;

pub use kernel::{gram_matrix, kernel_eval, KernelSpec, FULL_CACHE_LIMIT};
pub use model::{SvrModel, MODEL_FORMAT_VERSION};
pub use oracle::{brute_force_qp_oracle, OracleSolution, ORACLE_MAX_SAMPLES};
pub use solver::{
    dual_objective, kkt_violation, solve_nu_svr, train_nu_svr, train_nu_svr_traced, DualSolution, TrainOutcome,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvrError {
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("solver stopped after {iterations} iterations with KKT violation {violation:.3e}")]
    NotConverged { iterations: u64, violation: f64 },
    #[error("brute-force oracle handles at most {max} samples, got {n}")]
    OracleTooLarge { n: usize, max: usize },
    #[error("brute-force oracle restarts disagree: {first} vs {second}")]
    OracleDisagreement { first: f64, second: f64 },
    #[error("model file: {0}")]
    Format(String),
}

impl SvrError {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        SvrError::InvalidParameter {
            field,
            message: message.into(),
        }
    }
}

/// Inputs and targets to fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, SvrError> {
        if inputs.len() != targets.len() {
            return Err(SvrError::ShapeMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        if inputs.len() < 2 {
            return Err(SvrError::invalid("inputs", format!("need at least 2 samples, got {}", inputs.len())));
        }
        let dim = inputs[0].len();
        for (i, row) in inputs.iter().enumerate() {
            if row.len() != dim {
                return Err(SvrError::ShapeMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(SvrError::invalid("inputs", format!("row {i} has a non-finite entry")));
            }
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(SvrError::invalid("targets", format!("entry {i} is not finite")));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub(crate) fn rows(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(Vec::as_slice).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NuSvrParams {
    pub c: f64,
    pub nu: f64,
    pub kkt_tolerance: f64,
    pub max_iterations: u64,
}

impl NuSvrParams {
    pub const DEFAULT_KKT_TOLERANCE: f64 = 1e-6;
    pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;

    pub fn new(c: f64, nu: f64) -> Result<Self, SvrError> {
        let p = Self {
            c,
            nu,
            kkt_tolerance: Self::DEFAULT_KKT_TOLERANCE,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tolerance(mut self, kkt_tolerance: f64) -> Self {
        self.kkt_tolerance = kkt_tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: u64) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<(), SvrError> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(SvrError::invalid("c", format!("{} must be positive", self.c)));
        }
        // ν = 0 leaves the tube width unconstrained
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(SvrError::invalid("nu", format!("{} is not in (0, 1]", self.nu)));
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(SvrError::invalid("kkt_tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(SvrError::invalid("max_iterations", "must be positive"));
        }
        Ok(())
    }

    /// Box bound `C/N` on each dual variable.
    pub fn upper_bound(&self, n: usize) -> f64 {
        self.c / n as f64
    }
}

//! Expected PHEV charging demand on a wrapped 24 h grid.
//!
//! A vehicle arrives home at `T_a` (a normal distribution wrapped modulo
//! 24 h), then draws power `p` for the required charging duration `T_c`.
//! The expected demand at time `t` is `p · P((t − T_a) mod 24 < T_c)`,
//! which on the grid becomes a circular convolution of the binned arrival
//! distribution with the slot-averaged survival function of `T_c`.

mod arrival;
mod charging;
mod curve;
mod moments;
mod oracle;

pub use arrival::{wrapped_arrival_pmf, ArrivalTimeDist};
pub use charging::{ChargingFamily, ChargingTimeDist, EmpiricalPmf};
pub use curve::{
    charging_demand, expected_demand_curve, total_demand, ChargingEvent, ExpectedDemandCurve,
};
pub use moments::moment_match;
pub use oracle::{monte_carlo_demand_oracle, MonteCarloCurve};

use thiserror::Error;

/// Hours in the wrapped day.
pub const DAY_HOURS: f64 = 24.0;

/// Default grid: 96 quarter-hour slots.
pub const DEFAULT_GRID_SLOTS: usize = 96;

/// Arrival-time mean used throughout the reference experiments (hours).
pub const REFERENCE_ARRIVAL_MEAN: f64 = 19.0;
/// Arrival-time variance used throughout the reference experiments (hours²).
pub const REFERENCE_ARRIVAL_VARIANCE: f64 = 10.0;
/// Outlet power delivery (kW).
pub const REFERENCE_OUTLET_POWER: f64 = 2.0;
/// Mean charging duration shared by every charging-time family (hours).
pub const REFERENCE_CHARGING_MEAN: f64 = 6.0;
/// Charging duration variance shared by every family (hours²), that of `U(1, 11)`.
pub const REFERENCE_CHARGING_VARIANCE: f64 = 25.0 / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },
    #[error("{what} = {value} is outside [0, 24) hours")]
    OutOfDay { what: &'static str, value: f64 },
    #[error("grid length mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("no {family} distribution with mean {mean} and variance {variance} (residual {residual:.3e} after {iterations} iterations)")]
    InfeasibleTarget {
        family: ChargingFamily,
        mean: f64,
        variance: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("malformed PMF config: {0}")]
    PmfConfig(String),
}

pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> DemandError {
    DemandError::InvalidParameter {
        field,
        message: message.into(),
    }
}

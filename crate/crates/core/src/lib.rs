//! Residential daily electricity demand under uncoordinated PHEV charging.
//!
//! The crate has four layers:
//!
//! * [`demand`] turns arrival-time and charging-time distributions into the
//!   expected per-vehicle demand curve on a 96-slot day, with a Monte Carlo
//!   oracle and moment matching across charging-time families.
//! * [`svr`] is a ν-support-vector regression engine: kernels, a
//!   working-set (SMO) solver for the dual QP, prediction, and a
//!   projected-gradient oracle for small problems.
//! * [`data`] ingests or synthesizes 15-minute load profiles, builds
//!   calendar features and min-max scales everything to `[0, 1]`.
//! * [`eval`] holds the MSE/MAPE metrics, the month × scenario table
//!   experiment and a coarse-to-fine grid search.
//!
//! The `phev-demand` binary wires these into batch commands; see [`cli`].
//!
//! ```
//! use phev_demand::demand::{expected_demand_curve, ArrivalTimeDist, ChargingTimeDist};
//!
//! let curve = expected_demand_curve(
//!     &ArrivalTimeDist::reference(),
//!     &ChargingTimeDist::uniform(1.0, 11.0)?,
//!     2.0,
//!     96,
//! )?;
//! assert!((curve.energy() - 12.0).abs() < 1e-9);
//! # Ok::<(), phev_demand::demand::DemandError>(())
//! ```

pub mod cli;
pub mod data;
pub mod demand;
pub mod eval;
mod numeric;
pub mod svr;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/expected-demand.md")]
    mod expected_demand {}
    #[doc = include_str!("../../../book/src/nu-svr.md")]
    mod nu_svr {}
    #[doc = include_str!("../../../book/src/data-pipeline.md")]
    mod data_pipeline {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{mape, mse, EvalError, MapeMode};
use crate::data::{assemble_dataset, FeatureMap, LoadProfile, Scenario, ScenarioKind, SupervisedDataset, SLOTS_PER_DAY};
use crate::svr::{solve_nu_svr, KernelSpec, NuSvrParams, SvrModel};

/// January, April, July and October.
pub const DEFAULT_MONTHS: [u32; 4] = [1, 4, 7, 10];

/// One month of load data.
#[derive(Debug, Clone, PartialEq)]
pub struct CellInput {
    pub month: u32,
    pub profile: LoadProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableOptions {
    pub feature_map: FeatureMap,
    /// Trailing days held out from training and used for evaluation.
    /// Zero means fit and evaluate on the whole month.
    pub holdout_days: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            feature_map: FeatureMap::Calendar6,
            holdout_days: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub month: u32,
    pub scenario: ScenarioKind,
    pub mse_scaled: f64,
    pub mape_fraction: f64,
    pub mse_kw2: f64,
    pub mape_percent: f64,
    pub n_points: usize,
    /// Rows entering the MAPE; targets that scale to exactly zero are left out.
    pub mape_points: usize,
    pub iterations: u64,
    pub n_support: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub max_mse_scaled: f64,
    pub max_mape_fraction: f64,
    pub max_mse_kw2: f64,
    pub max_mape_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub summary: ReportSummary,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<ReportRow>) -> Self {
        let max = |f: fn(&ReportRow) -> f64| rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let summary = ReportSummary {
            max_mse_scaled: max(|r| r.mse_scaled),
            max_mape_fraction: max(|r| r.mape_fraction),
            max_mse_kw2: max(|r| r.mse_kw2),
            max_mape_percent: max(|r| r.mape_percent),
        };
        Self { rows, summary }
    }

    /// `month,scenario,mse_scaled,mape_fraction,mse_kw2,mape_percent,n_points`
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[(&str, String)]) -> std::io::Result<()> {
        for (k, v) in comments {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["month", "scenario", "mse_scaled", "mape_fraction", "mse_kw2", "mape_percent", "n_points"])?;
        for r in &self.rows {
            w.write_record([
                r.month.to_string(),
                r.scenario.to_string(),
                r.mse_scaled.to_string(),
                r.mape_fraction.to_string(),
                r.mse_kw2.to_string(),
                r.mape_percent.to_string(),
                r.n_points.to_string(),
            ])?;
        }
        w.flush()
    }
}

fn cell_error(month: u32, scenario: ScenarioKind, e: impl std::fmt::Display) -> EvalError {
    EvalError::Cell {
        month,
        scenario,
        message: e.to_string(),
    }
}

/// Trains on one assembled dataset and scores it.
pub(crate) fn evaluate_dataset(
    month: u32,
    ds: &SupervisedDataset,
    params: &NuSvrParams,
    kernel: &KernelSpec,
    holdout_days: usize,
) -> Result<(ReportRow, SvrModel), EvalError> {
    let fail = |e: &dyn std::fmt::Display| cell_error(month, ds.scenario, e);
    let days = ds.len() / SLOTS_PER_DAY;
    if holdout_days >= days {
        return Err(fail(&format!("holdout of {holdout_days} days leaves nothing to train on ({days} days)")));
    }
    let split = (days - holdout_days) * SLOTS_PER_DAY;
    let train = if holdout_days == 0 {
        ds.training_set()
    } else {
        ds.training_subset(0..split).map_err(|e| fail(&e))?
    };
    let eval_range = if holdout_days == 0 { 0..ds.len() } else { split..ds.len() };

    let outcome = solve_nu_svr(&train, params, kernel).map_err(|e| fail(&e))?;
    let model = outcome.model.with_scaler(ds.scalers.clone());
    let xs = &ds.features[eval_range.clone()];
    let targets = &ds.targets[eval_range.clone()];
    let preds = model.predict_many(xs).map_err(|e| fail(&e))?;

    let mse_scaled = mse(targets, &preds).map_err(|e| fail(&e))?;
    let preds_kw: Vec<f64> = preds.iter().map(|&p| ds.scalers.unscale_target(p)).collect();
    let mse_kw2 = mse(&ds.targets_kw[eval_range], &preds_kw).map_err(|e| fail(&e))?;

    // the scaled minimum is exactly zero, so relative error skips those rows
    let (t_nz, p_nz): (Vec<f64>, Vec<f64>) = targets.iter().zip(&preds).filter(|(t, _)| **t != 0.0).unzip();
    let (mape_fraction, mape_percent) = if t_nz.is_empty() {
        (0.0, 0.0)
    } else {
        (
            mape(&t_nz, &p_nz, MapeMode::Fraction).map_err(|e| fail(&e))?,
            mape(&t_nz, &p_nz, MapeMode::Percent).map_err(|e| fail(&e))?,
        )
    };

    let row = ReportRow {
        month,
        scenario: ds.scenario,
        mse_scaled,
        mape_fraction,
        mse_kw2,
        mape_percent,
        n_points: targets.len(),
        mape_points: t_nz.len(),
        iterations: outcome.iterations,
        n_support: model.n_support(),
        epsilon: model.epsilon(),
    };
    Ok((row, model))
}

/// Assembles, trains and scores one (month, scenario) cell.
pub fn evaluate_cell(
    input: &CellInput,
    scenario: &Scenario,
    params: &NuSvrParams,
    kernel: &KernelSpec,
    options: &TableOptions,
) -> Result<(ReportRow, SvrModel), EvalError> {
    let ds = assemble_dataset(&input.profile, scenario, options.feature_map)
        .map_err(|e| cell_error(input.month, scenario.kind(), e))?;
    evaluate_dataset(input.month, &ds, params, kernel, options.holdout_days)
}

fn check_inputs(inputs: &[CellInput], scenarios: &[Scenario]) -> Result<(), EvalError> {
    if inputs.is_empty() {
        return Err(EvalError::Invalid("no months to evaluate".into()));
    }
    if scenarios.is_empty() {
        return Err(EvalError::Invalid("no scenarios to evaluate".into()));
    }
    Ok(())
}

/// Every cell in table order (scenario-major, month-minor), failures kept
/// in place.
pub fn run_table_cells(
    inputs: &[CellInput],
    scenarios: &[Scenario],
    params: &NuSvrParams,
    kernel: &KernelSpec,
    options: &TableOptions,
) -> Result<Vec<Result<ReportRow, EvalError>>, EvalError> {
    check_inputs(inputs, scenarios)?;
    params.validate()?;
    kernel.validate()?;
    Ok(scenarios
        .iter()
        .flat_map(|s| inputs.iter().map(move |i| (i, s)))
        .map(|(input, scenario)| evaluate_cell(input, scenario, params, kernel, options).map(|(row, _)| row))
        .collect())
}

/// Runs the month × scenario table with one shared parameter set and stops
/// at the first failing cell.
pub fn run_table_experiment(
    inputs: &[CellInput],
    scenarios: &[Scenario],
    params: &NuSvrParams,
    kernel: &KernelSpec,
    options: &TableOptions,
) -> Result<EvalReport, EvalError> {
    let rows = run_table_cells(inputs, scenarios, params, kernel, options)?
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_rows(rows))
}


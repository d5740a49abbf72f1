use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::evaluate_dataset;
use super::{CellInput, EvalError, ReportRow, TableOptions};
use crate::data::{assemble_dataset, Scenario, ScenarioKind, SupervisedDataset};
use crate::svr::{KernelSpec, NuSvrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridObjective {
    /// Worst-cell MSE, ties broken by worst-cell MAPE.
    #[default]
    Mse,
    /// Worst-cell MAPE, ties broken by worst-cell MSE.
    Mape,
    /// Largest month-averaged MSE over scenarios, ties broken the same way
    /// on MAPE.
    MaxOverScenarios,
}

impl std::str::FromStr for GridObjective {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mse" => Ok(GridObjective::Mse),
            "mape" => Ok(GridObjective::Mape),
            "max-over-scenarios" => Ok(GridObjective::MaxOverScenarios),
            other => Err(EvalError::Invalid(format!("unknown grid objective `{other}`"))),
        }
    }
}

/// Coarse RBF grid plus local refinement.
///
/// Refinement level `l` (from 1) scans `x · f^{±1}` in every coordinate
/// around the incumbent, with `f = refine_factor^(1/2^(l−1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSearchSpec {
    pub c: Vec<f64>,
    pub nu: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default = "default_factor")]
    pub refine_factor: f64,
    #[serde(default)]
    pub refine_depth: usize,
    #[serde(default)]
    pub objective: GridObjective,
}

fn default_factor() -> f64 {
    2.0
}

impl GridSearchSpec {
    pub fn new(c: Vec<f64>, nu: Vec<f64>, gamma: Vec<f64>) -> Self {
        Self {
            c,
            nu,
            gamma,
            refine_factor: default_factor(),
            refine_depth: 0,
            objective: GridObjective::Mse,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::Invalid(m));
        for (name, values) in [("c", &self.c), ("nu", &self.nu), ("gamma", &self.gamma)] {
            if values.is_empty() {
                return bad(format!("grid `{name}` is empty"));
            }
            for &v in values {
                let ok = match name {
                    "nu" => v > 0.0 && v <= 1.0,
                    _ => v > 0.0 && v.is_finite(),
                };
                if !ok {
                    return bad(format!("grid `{name}` has out-of-domain value {v}"));
                }
            }
        }
        if !(self.refine_factor > 1.0) || !self.refine_factor.is_finite() {
            return bad(format!("refine_factor {} must be finite and > 1", self.refine_factor));
        }
        if self.refine_depth > 16 {
            return bad(format!("refine_depth {} is above 16", self.refine_depth));
        }
        Ok(())
    }

    fn coarse_points(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.c.len() * self.nu.len() * self.gamma.len());
        for &c in &self.c {
            for &nu in &self.nu {
                for &g in &self.gamma {
                    out.push([c, nu, g]);
                }
            }
        }
        out
    }
}

/// Assembled datasets shared by every grid point.
#[derive(Debug, Clone)]
pub struct GridContext {
    cells: Vec<(u32, SupervisedDataset)>,
    holdout_days: usize,
    kkt_tolerance: f64,
    max_iterations: u64,
}

impl GridContext {
    pub fn new(inputs: &[CellInput], scenarios: &[Scenario], options: &TableOptions) -> Result<Self, EvalError> {
        if inputs.is_empty() || scenarios.is_empty() {
            return Err(EvalError::Invalid("grid search needs at least one month and one scenario".into()));
        }
        let mut cells = Vec::with_capacity(inputs.len() * scenarios.len());
        for s in scenarios {
            for input in inputs {
                cells.push((input.month, assemble_dataset(&input.profile, s, options.feature_map)?));
            }
        }
        Ok(Self {
            cells,
            holdout_days: options.holdout_days,
            kkt_tolerance: NuSvrParams::DEFAULT_KKT_TOLERANCE,
            max_iterations: NuSvrParams::DEFAULT_MAX_ITERATIONS,
        })
    }

    pub fn with_solver_limits(mut self, kkt_tolerance: f64, max_iterations: u64) -> Self {
        self.kkt_tolerance = kkt_tolerance;
        self.max_iterations = max_iterations;
        self
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    fn score(&self, p: [f64; 3], objective: GridObjective, level: usize) -> GridPoint {
        let [c, nu, gamma] = p;
        let kernel = KernelSpec::Rbf { gamma };
        let rows: Vec<Option<ReportRow>> = match NuSvrParams::new(c, nu) {
            Ok(params) => {
                let params = params
                    .with_tolerance(self.kkt_tolerance)
                    .with_max_iterations(self.max_iterations);
                self.cells
                    .iter()
                    .map(|(month, ds)| {
                        evaluate_dataset(*month, ds, &params, &kernel, self.holdout_days)
                            .ok()
                            .map(|(r, _)| r)
                    })
                    .collect()
            }
            Err(_) => vec![None; self.cells.len()],
        };
        let converged = rows.iter().all(Option::is_some);
        let (objective_value, tie_break) = scalarize(&self.cells, &rows, objective);
        GridPoint {
            c,
            nu,
            gamma,
            objective: objective_value,
            tie_break,
            converged,
            level,
        }
    }
}

fn worst(rows: &[Option<ReportRow>], f: fn(&ReportRow) -> f64) -> f64 {
    rows.iter()
        .map(|r| r.as_ref().map_or(f64::INFINITY, f))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn worst_scenario_mean(cells: &[(u32, SupervisedDataset)], rows: &[Option<ReportRow>], f: fn(&ReportRow) -> f64) -> f64 {
    let mut worst_value = f64::NEG_INFINITY;
    for kind in ScenarioKind::ALL {
        let values: Vec<f64> = cells
            .iter()
            .zip(rows)
            .filter(|((_, ds), _)| ds.scenario == kind)
            .map(|(_, r)| r.as_ref().map_or(f64::INFINITY, f))
            .collect();
        if !values.is_empty() {
            worst_value = worst_value.max(values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    worst_value
}

fn scalarize(cells: &[(u32, SupervisedDataset)], rows: &[Option<ReportRow>], objective: GridObjective) -> (f64, f64) {
    let mse = |r: &ReportRow| r.mse_scaled;
    let mape = |r: &ReportRow| r.mape_fraction;
    let (a, b) = match objective {
        GridObjective::Mse => (worst(rows, mse), worst(rows, mape)),
        GridObjective::Mape => (worst(rows, mape), worst(rows, mse)),
        GridObjective::MaxOverScenarios => (worst_scenario_mean(cells, rows, mse), worst_scenario_mean(cells, rows, mape)),
    };
    let clean = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    (clean(a), clean(b))
}

/// One evaluated parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub nu: f64,
    pub gamma: f64,
    pub objective: f64,
    pub tie_break: f64,
    /// Every cell trained to tolerance.
    pub converged: bool,
    /// 0 for the coarse grid, then the refinement level.
    pub level: usize,
}

impl GridPoint {
    fn rank(&self, other: &Self) -> Ordering {
        self.objective
            .total_cmp(&other.objective)
            .then(self.tie_break.total_cmp(&other.tie_break))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GridPoint,
    /// Coarse points in `c`, `nu`, `gamma` order, then each refinement level.
    pub trace: Vec<GridPoint>,
}

impl GridSearchResult {
    /// `c,nu,gamma,objective,converged`
    pub fn write_trace_csv<W: Write>(&self, mut out: W, comments: &[(&str, String)]) -> std::io::Result<()> {
        for (k, v) in comments {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["c", "nu", "gamma", "objective", "converged"])?;
        for p in &self.trace {
            w.write_record([
                p.c.to_string(),
                p.nu.to_string(),
                p.gamma.to_string(),
                p.objective.to_string(),
                p.converged.to_string(),
            ])?;
        }
        w.flush()
    }
}

fn key(p: &[f64; 3]) -> [u64; 3] {
    p.map(f64::to_bits)
}

fn best_of(trace: &[GridPoint]) -> GridPoint {
    let mut best = trace[0];
    for p in &trace[1..] {
        if p.rank(&best) == Ordering::Less {
            best = *p;
        }
    }
    best
}

/// Scores every coarse point, then refines around the incumbent.
///
/// Points at one level run in parallel on `jobs` threads (all cores when
/// `None`); the trace order depends only on the spec.
pub fn grid_search(spec: &GridSearchSpec, ctx: &GridContext, jobs: Option<usize>) -> Result<GridSearchResult, EvalError> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(EvalError::Invalid("jobs must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| EvalError::Invalid(format!("thread pool: {e}")))?;

    let mut seen = HashSet::new();
    let mut trace = Vec::new();
    let mut run_level = |points: Vec<[f64; 3]>, level: usize, trace: &mut Vec<GridPoint>| {
        let fresh: Vec<[f64; 3]> = points.into_iter().filter(|p| seen.insert(key(p))).collect();
        let scored: Vec<GridPoint> =
            pool.install(|| fresh.par_iter().map(|&p| ctx.score(p, spec.objective, level)).collect());
        trace.extend(scored);
    };

    run_level(spec.coarse_points(), 0, &mut trace);
    let mut best = best_of(&trace);
    for level in 1..=spec.refine_depth {
        let f = spec.refine_factor.powf(0.5f64.powi(level as i32 - 1));
        let mut points = Vec::with_capacity(26);
        for fc in [1.0 / f, 1.0, f] {
            for fn_ in [1.0 / f, 1.0, f] {
                for fg in [1.0 / f, 1.0, f] {
                    let nu = best.nu * fn_;
                    if nu > 1.0 {
                        continue;
                    }
                    points.push([best.c * fc, nu, best.gamma * fg]);
                }
            }
        }
        run_level(points, level, &mut trace);
        best = best_of(&trace);
    }
    Ok(GridSearchResult { best, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(GridSearchSpec::new(vec![1.0], vec![0.5], vec![10.0]).validate().is_ok());
        assert!(GridSearchSpec::new(vec![], vec![0.5], vec![10.0]).validate().is_err());
        assert!(GridSearchSpec::new(vec![1.0], vec![1.5], vec![10.0]).validate().is_err());
        assert!(GridSearchSpec::new(vec![1.0], vec![0.5], vec![-1.0]).validate().is_err());
        let mut s = GridSearchSpec::new(vec![1.0], vec![0.5], vec![10.0]);
        s.refine_factor = 1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn ties_keep_the_earliest_point() {
        let p = |c: f64, o: f64, t: f64| GridPoint {
            c,
            nu: 0.5,
            gamma: 1.0,
            objective: o,
            tie_break: t,
            converged: true,
            level: 0,
        };
        let trace = [p(1.0, 2.0, 1.0), p(2.0, 1.0, 3.0), p(3.0, 1.0, 3.0), p(4.0, 1.0, 2.0), p(5.0, f64::INFINITY, 0.0)];
        assert_eq!(best_of(&trace).c, 4.0);
        assert_eq!(best_of(&trace[..3]).c, 2.0);
    }
}

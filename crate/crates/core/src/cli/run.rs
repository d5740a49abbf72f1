use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, NaiveDate};
use serde_json::{json, Value};

use super::{Cli, CliError, Command, RunConfig};
use crate::data::{
    assemble_dataset, synthesize_profile_with, LoadProfile, Scenario, ScenarioKind, SupervisedDataset,
};
use crate::demand::{
    expected_demand_curve, moment_match, ArrivalTimeDist, ChargingFamily, ChargingTimeDist, EmpiricalPmf,
    ExpectedDemandCurve,
};
use crate::eval::{
    evaluate_cell, grid_search, mape, mse, run_table_cells, CellInput, EvalReport, GridContext, MapeMode, ReportRow,
    TableOptions,
};
use crate::svr::SvrModel;

/// Resolves the config and runs the chosen command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    let command = cli.command.name();
    if cfg.seed.is_none() {
        eprintln!("seed: {} (default)", cfg.seed());
    }
    let ctx = Context {
        hash: cfg.hash(command),
        out: cfg.out_dir(),
        command,
    };
    eprintln!("config_hash: {}", ctx.hash);
    fs::create_dir_all(&ctx.out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", ctx.out.display())))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::DemandCurve => demand_curve(&cfg, &ctx),
        Command::SynthProfile => synth_profile(&cfg, &ctx),
        Command::Train => train(&cfg, &ctx),
        Command::Evaluate { model } => evaluate(&cfg, &ctx, model),
        Command::GridSearch => grid(&cfg, &ctx),
        Command::Table => table(&cfg, &ctx),
    })
}

struct Context {
    hash: String,
    out: PathBuf,
    command: &'static str,
}

impl Context {
    fn comments(&self, cfg: &RunConfig) -> Vec<(&'static str, String)> {
        vec![("config_hash", self.hash.clone()), ("seed", cfg.seed().to_string())]
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn write_csv(
        &self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
        self.write(name, &buf)
    }

    /// JSON sidecar; the only place a wall-clock time appears.
    fn write_json(&self, name: &str, cfg: &RunConfig, body: Value) -> Result<PathBuf, CliError> {
        let mut doc = json!({
            "command": self.command,
            "config_hash": self.hash,
            "seed": cfg.seed(),
            "generated_at": now_utc(),
        });
        if let (Value::Object(doc), Value::Object(body)) = (&mut doc, body) {
            doc.extend(body);
        }
        let text = serde_json::to_string_pretty(&doc).expect("json serializes") + "\n";
        self.write(name, text.as_bytes())
    }
}

fn now_utc() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs() as i64);
    DateTime::from_timestamp(secs, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_default()
}

fn days_in_month(year: i32, month: u32) -> usize {
    let (y, m) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(y, m, 1)
        .and_then(|d| d.pred_opt())
        .map_or(28, |d| d.day() as usize)
}

fn load_inputs(cfg: &RunConfig) -> Result<Vec<CellInput>, CliError> {
    if cfg.data.inputs.is_empty() {
        return cfg
            .months
            .iter()
            .map(|&m| {
                let days = cfg.data.days.unwrap_or_else(|| days_in_month(cfg.data.synth.year, m));
                synthesize_profile_with(&cfg.data.synth, m, days, cfg.seed())
                    .map(|profile| CellInput { month: m, profile })
                    .map_err(|e| CliError::Config(format!("data.synth: {e}")))
            })
            .collect();
    }
    let profiles = cfg
        .data
        .inputs
        .iter()
        .map(|p| LoadProfile::ingest_path(p).map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    cfg.months
        .iter()
        .map(|&m| {
            profiles
                .iter()
                .find_map(|p| p.month_subset(m).ok())
                .map(|profile| CellInput { month: m, profile })
                .ok_or_else(|| CliError::Config(format!("months: no complete days for month {m} in the input files")))
        })
        .collect()
}

fn charging_for(cfg: &RunConfig, family: &str) -> Result<ChargingTimeDist, CliError> {
    let d = &cfg.demand;
    let matched = |f: ChargingFamily| {
        moment_match(f, d.charging_mean, d.charging_variance)
            .map_err(|e| CliError::Config(format!("demand ({family}): {e}")))
    };
    match family {
        "uniform" => matched(ChargingFamily::Uniform),
        "trunc-gaussian" => matched(ChargingFamily::TruncatedGaussian),
        "rician" => matched(ChargingFamily::Rician),
        "non-uniform" => {
            let pmf = match &d.pmf_path {
                Some(path) => EmpiricalPmf::from_json_file(path)
                    .map_err(|e| CliError::Config(format!("demand.pmf_path {}: {e}", path.display())))?,
                None => EmpiricalPmf::default_non_uniform(),
            };
            ChargingTimeDist::empirical(pmf).map_err(|e| CliError::Config(format!("demand.pmf_path: {e}")))
        }
        other => Err(CliError::Config(format!("families: unknown family `{other}`"))),
    }
}

fn curve_for(cfg: &RunConfig, charging: &ChargingTimeDist) -> Result<ExpectedDemandCurve, CliError> {
    let d = &cfg.demand;
    let arrival = ArrivalTimeDist::new(d.arrival_mean, d.arrival_variance)
        .map_err(|e| CliError::Config(format!("demand: {e}")))?;
    expected_demand_curve(&arrival, charging, d.outlet_power, d.grid_slots)
        .map_err(|e| CliError::Config(format!("demand: {e}")))
}

fn scenarios(cfg: &RunConfig) -> Result<Vec<Scenario>, CliError> {
    cfg.scenarios
        .iter()
        .map(|&kind| {
            let family = match kind {
                ScenarioKind::NoPhev => return Ok(Scenario::no_phev()),
                ScenarioKind::UniformTc => "uniform",
                ScenarioKind::NonUniformTc => "non-uniform",
            };
            let curve = curve_for(cfg, &charging_for(cfg, family)?)?;
            Scenario::with_curve(kind, cfg.fleet_size, curve).map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

fn options(cfg: &RunConfig) -> TableOptions {
    TableOptions {
        feature_map: cfg.data.feature_map,
        holdout_days: cfg.data.holdout_days,
    }
}

fn demand_curve(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let mut entries = Vec::new();
    for family in &cfg.families {
        let charging = charging_for(cfg, family)?;
        let curve = curve_for(cfg, &charging)?;
        let name = format!("demand_curve_{family}.csv");
        let mut comments = ctx.comments(cfg);
        comments.push(("family", family.clone()));
        ctx.write_csv(&name, |buf| curve.write_csv(buf, &comments))?;
        let expected = cfg.demand.outlet_power * charging.mean();
        let energy = curve.energy();
        println!("{family}: {energy:.6} kWh/day (expected {expected:.6}) -> {name}");
        entries.push(json!({
            "family": family,
            "file": name,
            "distribution": charging,
            "mean_hours": charging.mean(),
            "energy_kwh": energy,
            "expected_energy_kwh": expected,
            "relative_error": (energy - expected).abs() / expected,
        }));
    }
    ctx.write_json(
        "demand_curves.json",
        cfg,
        json!({ "demand": cfg.demand, "curves": entries }),
    )?;
    Ok(())
}

fn synth_profile(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let mut files = Vec::new();
    for input in load_inputs(cfg)? {
        let name = format!("profile_{:02}.csv", input.month);
        let comments = ctx.comments(cfg);
        ctx.write_csv(&name, |buf| {
            use std::io::Write;
            for (k, v) in &comments {
                writeln!(buf, "# {k}={v}")?;
            }
            input.profile.export_csv(&mut *buf)
        })?;
        let total: f64 = input.profile.kwh().iter().sum();
        println!("month {}: {} days, {total:.3} kWh -> {name}", input.month, input.profile.days());
        files.push(json!({ "month": input.month, "file": name, "days": input.profile.days(), "total_kwh": total }));
    }
    ctx.write_json("synth_profiles.json", cfg, json!({ "synth": cfg.data.synth, "profiles": files }))?;
    Ok(())
}

fn train(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let input = load_inputs(cfg)?.into_iter().next().expect("months is non-empty");
    let scenario = scenarios(cfg)?.into_iter().next().expect("scenarios is non-empty");
    let params = cfg.svr.params()?;
    let opts = options(cfg);
    let (row, model) = evaluate_cell(&input, &scenario, &params, &cfg.svr.kernel, &opts)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let model = model
        .with_metadata("config_hash", ctx.hash.clone())
        .with_metadata("month", input.month.to_string())
        .with_metadata("scenario", scenario.kind().to_string())
        .with_metadata("feature_map", opts.feature_map.as_str());
    ctx.write("model.json", (model.to_json() + "\n").as_bytes())?;

    let ds = assemble_dataset(&input.profile, &scenario, opts.feature_map)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let comments = ctx.comments(cfg);
    ctx.write_csv("dataset.csv", |buf| ds.write_csv(buf, &comments))?;
    println!(
        "month {} {}: {} iterations, {} support vectors, mse {:e}, mape {}",
        row.month, row.scenario, row.iterations, row.n_support, row.mse_scaled, row.mape_fraction
    );
    ctx.write_json("train.json", cfg, json!({ "svr": cfg.svr, "model_file": "model.json", "fit": row }))?;
    Ok(())
}

fn score(month: u32, ds: &SupervisedDataset, model: &SvrModel) -> Result<ReportRow, CliError> {
    let scaler = model
        .scaler()
        .ok_or_else(|| CliError::Config("model file carries no scaler".into()))?;
    let runtime = |e: &dyn std::fmt::Display| CliError::Runtime(format!("month {month}, {}: {e}", ds.scenario));
    let mut preds = Vec::with_capacity(ds.len());
    let mut targets = Vec::with_capacity(ds.len());
    for (ts, kw) in ds.timestamps.iter().zip(&ds.targets_kw) {
        let raw = ds.feature_map.build(ts).map_err(|e| runtime(&e))?;
        let x = scaler.scale_features(&raw).map_err(|e| runtime(&e))?;
        preds.push(model.predict(&x).map_err(|e| runtime(&e))?);
        targets.push(scaler.scale_target(*kw));
    }
    let preds_kw: Vec<f64> = preds.iter().map(|&p| scaler.unscale_target(p)).collect();
    let (t_nz, p_nz): (Vec<f64>, Vec<f64>) = targets.iter().zip(&preds).filter(|(t, _)| **t != 0.0).unzip();
    let frac = if t_nz.is_empty() { 0.0 } else { mape(&t_nz, &p_nz, MapeMode::Fraction).map_err(|e| runtime(&e))? };
    let pct = if t_nz.is_empty() { 0.0 } else { mape(&t_nz, &p_nz, MapeMode::Percent).map_err(|e| runtime(&e))? };
    Ok(ReportRow {
        month,
        scenario: ds.scenario,
        mse_scaled: mse(&targets, &preds).map_err(|e| runtime(&e))?,
        mape_fraction: frac,
        mse_kw2: mse(&ds.targets_kw, &preds_kw).map_err(|e| runtime(&e))?,
        mape_percent: pct,
        n_points: ds.len(),
        mape_points: t_nz.len(),
        iterations: 0,
        n_support: model.n_support(),
        epsilon: model.epsilon(),
    })
}

fn evaluate(cfg: &RunConfig, ctx: &Context, model_path: &Path) -> Result<(), CliError> {
    if !model_path.is_file() {
        return Err(CliError::Config(format!("model file {} does not exist", model_path.display())));
    }
    let model = SvrModel::load(model_path).map_err(|e| CliError::Config(e.to_string()))?;
    if model.input_dim() != cfg.data.feature_map.dim() {
        return Err(CliError::Config(format!(
            "data.feature_map: `{}` has {} features but the model expects {}",
            cfg.data.feature_map.as_str(),
            cfg.data.feature_map.dim(),
            model.input_dim()
        )));
    }
    let inputs = load_inputs(cfg)?;
    let mut rows = Vec::new();
    for scenario in scenarios(cfg)? {
        for input in &inputs {
            let ds = assemble_dataset(&input.profile, &scenario, cfg.data.feature_map)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            rows.push(score(input.month, &ds, &model)?);
        }
    }
    let report = EvalReport::from_rows(rows);
    let comments = ctx.comments(cfg);
    ctx.write_csv("evaluation.csv", |buf| report.write_csv(buf, &comments))?;
    print_rows(&report);
    let source = model.metadata().get("config_hash").cloned().unwrap_or_default();
    ctx.write_json(
        "evaluation.json",
        cfg,
        json!({ "model_config_hash": source, "mape_mode": "fraction", "report": report }),
    )?;
    Ok(())
}

fn grid(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let inputs = load_inputs(cfg)?;
    let scen = scenarios(cfg)?;
    let gctx = GridContext::new(&inputs, &scen, &options(cfg))
        .map_err(|e| CliError::Runtime(e.to_string()))?
        .with_solver_limits(cfg.svr.kkt_tolerance, cfg.svr.max_iterations);
    let result = grid_search(&cfg.grid, &gctx, cfg.jobs).map_err(|e| CliError::Runtime(e.to_string()))?;
    let comments = ctx.comments(cfg);
    ctx.write_csv("grid_trace.csv", |buf| result.write_trace_csv(buf, &comments))?;
    let b = result.best;
    println!(
        "incumbent: c={} nu={} gamma={} objective={:e} converged={}",
        b.c, b.nu, b.gamma, b.objective, b.converged
    );
    ctx.write_json(
        "grid_best.json",
        cfg,
        json!({
            "grid": cfg.grid,
            "kernel": "rbf",
            "best": b,
            "points_evaluated": result.trace.len(),
            "trace_file": "grid_trace.csv",
        }),
    )?;
    Ok(())
}

fn print_rows(report: &EvalReport) {
    println!("month  scenario         mse_scaled    mape_fraction  n_points");
    for r in &report.rows {
        println!(
            "{:>5}  {:<15}  {:<12.4e}  {:<13.6}  {}",
            r.month,
            r.scenario.as_str(),
            r.mse_scaled,
            r.mape_fraction,
            r.n_points
        );
    }
}

fn table(cfg: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let inputs = load_inputs(cfg)?;
    let scen = scenarios(cfg)?;
    let params = cfg.svr.params()?;
    let cells = run_table_cells(&inputs, &scen, &params, &cfg.svr.kernel, &options(cfg))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let total = cells.len();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for cell in cells {
        match cell {
            Ok(r) => rows.push(r),
            Err(e) => {
                eprintln!("cell failed: {e}");
                failures.push(e.to_string());
            }
        }
    }
    let report = EvalReport::from_rows(rows);
    let comments = ctx.comments(cfg);
    ctx.write_csv("table_report.csv", |buf| report.write_csv(buf, &comments))?;
    print_rows(&report);
    ctx.write_json(
        "table_report.json",
        cfg,
        json!({
            "svr": cfg.svr,
            "mape_mode": "fraction",
            "metric_space": "min-max scaled targets; zero scaled targets excluded from MAPE",
            "report": report,
            "failures": failures,
        }),
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{} of {total} cells failed", failures.len())))
    }
}

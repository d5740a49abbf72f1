use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CliError, Flags};
use crate::data::{FeatureMap, ScenarioKind, SynthConfig};
use crate::demand::{
    REFERENCE_ARRIVAL_MEAN, REFERENCE_ARRIVAL_VARIANCE, REFERENCE_CHARGING_MEAN, REFERENCE_CHARGING_VARIANCE,
    REFERENCE_OUTLET_POWER,
};
use crate::eval::{GridSearchSpec, DEFAULT_MONTHS};
use crate::svr::{KernelSpec, NuSvrParams};

pub const DEFAULT_SEED: u64 = 42;

/// Curve families the `demand-curve` command knows how to draw.
pub const CURVE_FAMILIES: [&str; 4] = ["uniform", "non-uniform", "trunc-gaussian", "rician"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandSection {
    pub arrival_mean: f64,
    pub arrival_variance: f64,
    pub outlet_power: f64,
    pub grid_slots: usize,
    /// Target moments for the moment-matched families.
    pub charging_mean: f64,
    pub charging_variance: f64,
    /// JSON histogram used for the non-uniform family instead of the built-in one.
    pub pmf_path: Option<PathBuf>,
}

impl Default for DemandSection {
    fn default() -> Self {
        Self {
            arrival_mean: REFERENCE_ARRIVAL_MEAN,
            arrival_variance: REFERENCE_ARRIVAL_VARIANCE,
            outlet_power: REFERENCE_OUTLET_POWER,
            grid_slots: 96,
            charging_mean: REFERENCE_CHARGING_MEAN,
            charging_variance: REFERENCE_CHARGING_VARIANCE,
            pmf_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Measured profile CSVs. Empty means synthesize one profile per month.
    pub inputs: Vec<PathBuf>,
    /// Days per synthetic month; the whole calendar month when unset.
    pub days: Option<usize>,
    pub feature_map: FeatureMap,
    pub holdout_days: usize,
    pub synth: SynthConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            days: None,
            feature_map: FeatureMap::Calendar6,
            holdout_days: 0,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrSection {
    pub c: f64,
    pub nu: f64,
    pub kernel: KernelSpec,
    pub kkt_tolerance: f64,
    pub max_iterations: u64,
}

impl Default for SvrSection {
    fn default() -> Self {
        Self {
            c: 1000.0,
            nu: 0.5,
            kernel: KernelSpec::Rbf { gamma: 10.0 },
            kkt_tolerance: NuSvrParams::DEFAULT_KKT_TOLERANCE,
            max_iterations: NuSvrParams::DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl SvrSection {
    pub fn params(&self) -> Result<NuSvrParams, CliError> {
        let p = NuSvrParams {
            c: self.c,
            nu: self.nu,
            kkt_tolerance: self.kkt_tolerance,
            max_iterations: self.max_iterations,
        };
        p.validate().map_err(|e| CliError::Config(format!("svr: {e}")))?;
        self.kernel.validate().map_err(|e| CliError::Config(format!("svr.kernel: {e}")))?;
        Ok(p)
    }
}

fn default_grid() -> GridSearchSpec {
    GridSearchSpec::new(vec![10.0, 100.0, 1000.0], vec![0.25, 0.5, 0.75], vec![1.0, 10.0, 100.0])
}

/// File contents after flag overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub months: Vec<u32>,
    pub scenarios: Vec<ScenarioKind>,
    pub fleet_size: usize,
    pub families: Vec<String>,
    pub demand: DemandSection,
    pub data: DataSection,
    pub svr: SvrSection,
    #[serde(default = "default_grid")]
    pub grid: GridSearchSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            jobs: None,
            months: DEFAULT_MONTHS.to_vec(),
            scenarios: ScenarioKind::ALL.to_vec(),
            fleet_size: 1,
            families: CURVE_FAMILIES.iter().map(|s| s.to_string()).collect(),
            demand: DemandSection::default(),
            data: DataSection::default(),
            svr: SvrSection::default(),
            grid: default_grid(),
        }
    }
}

/// Parses `1,4,7`, `jan,apr` or `all`.
pub fn parse_months(text: &str) -> Result<Vec<u32>, CliError> {
    const NAMES: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];
    if text.trim() == "all" {
        return Ok((1..=12).collect());
    }
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let lower = item.to_ascii_lowercase();
        let month = match lower.parse::<u32>() {
            Ok(m) => m,
            Err(_) => NAMES
                .iter()
                .position(|n| lower.starts_with(n))
                .map(|i| i as u32 + 1)
                .ok_or_else(|| CliError::Config(format!("--months: `{item}` is not a month")))?,
        };
        if !(1..=12).contains(&month) {
            return Err(CliError::Config(format!("--months: {month} is not in 1..=12")));
        }
        out.push(month);
    }
    if out.is_empty() {
        return Err(CliError::Config("--months: empty list".into()));
    }
    Ok(out)
}

pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioKind>, CliError> {
    if text.trim() == "all" {
        return Ok(ScenarioKind::ALL.to_vec());
    }
    let out = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ScenarioKind>().map_err(|e| CliError::Config(format!("--scenarios: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(CliError::Config("--scenarios: empty list".into()));
    }
    Ok(out)
}

pub fn parse_families(text: &str) -> Result<Vec<String>, CliError> {
    if text.trim() == "all" {
        return Ok(CURVE_FAMILIES.iter().map(|s| s.to_string()).collect());
    }
    let out: Vec<String> = text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if out.is_empty() {
        return Err(CliError::Config("--families: empty list".into()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", origin.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, path)
    }

    /// Loads `--config` if given, then applies every flag on top.
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        if let Some(seed) = flags.seed {
            cfg.seed = Some(seed);
        }
        if let Some(out) = &flags.out {
            cfg.out = Some(out.clone());
        }
        if let Some(jobs) = flags.jobs {
            cfg.jobs = Some(jobs);
        }
        if let Some(m) = &flags.months {
            cfg.months = parse_months(m)?;
        }
        if let Some(s) = &flags.scenarios {
            cfg.scenarios = parse_scenarios(s)?;
        }
        if let Some(n) = flags.fleet_size {
            cfg.fleet_size = n;
        }
        if let Some(f) = &flags.families {
            cfg.families = parse_families(f)?;
        }
        if let Some(p) = &flags.input {
            cfg.data.inputs = vec![p.clone()];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.months.is_empty() {
            return Err(CliError::Config("months: empty list".into()));
        }
        if let Some(m) = self.months.iter().find(|m| !(1..=12).contains(*m)) {
            return Err(CliError::Config(format!("months: {m} is not in 1..=12")));
        }
        if self.scenarios.is_empty() {
            return Err(CliError::Config("scenarios: empty list".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs: must be at least 1".into()));
        }
        if self.families.is_empty() {
            return Err(CliError::Config("families: empty list".into()));
        }
        if let Some(f) = self.families.iter().find(|f| !CURVE_FAMILIES.contains(&f.as_str())) {
            return Err(CliError::Config(format!(
                "families: unknown family `{f}` (expected one of {})",
                CURVE_FAMILIES.join(", ")
            )));
        }
        if self.data.days == Some(0) {
            return Err(CliError::Config("data.days: must be at least 1".into()));
        }
        self.data
            .synth
            .validate()
            .map_err(|e| CliError::Config(format!("data.synth: {e}")))?;
        for path in self.data.inputs.iter().chain(&self.demand.pmf_path) {
            if !path.is_file() {
                return Err(CliError::Config(format!("input file {} does not exist", path.display())));
            }
        }
        self.svr.params()?;
        self.grid.validate().map_err(|e| CliError::Config(format!("grid: {e}")))?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    ///
    /// The output directory and thread count are left out since they do not
    /// change any result.
    pub fn hash(&self, command: &str) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        canonical.jobs = None;
        canonical.seed = Some(self.seed());
        let json = serde_json::to_string(&(command, &canonical)).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_lists() {
        assert_eq!(parse_months("1,4,7,10").unwrap(), vec![1, 4, 7, 10]);
        assert_eq!(parse_months("jan, July").unwrap(), vec![1, 7]);
        assert_eq!(parse_months("all").unwrap().len(), 12);
        assert!(parse_months("13").is_err());
        assert!(parse_months("smarch").is_err());
    }

    #[test]
    fn toml_roundtrip_and_hash_stability() {
        let text = r#"
            seed = 7
            months = [1]
            scenarios = ["no-phev"]
            [svr]
            c = 10.0
            kernel = { type = "rbf", gamma = 2.0 }
            [grid]
            c = [1.0]
            nu = [0.5]
            gamma = [10.0]
        "#;
        let cfg = RunConfig::from_toml(text, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.svr.kernel, KernelSpec::Rbf { gamma: 2.0 });
        assert_eq!(cfg.svr.nu, 0.5);
        assert_eq!(cfg.hash("table"), cfg.clone().hash("table"));
        assert_ne!(cfg.hash("table"), cfg.hash("train"));
        let mut moved = cfg.clone();
        moved.out = Some("elsewhere".into());
        moved.jobs = Some(3);
        assert_eq!(moved.hash("table"), cfg.hash("table"));
        assert_eq!(cfg.hash("table").len(), 16);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sede = 3", Path::new("x.toml")).is_err());
    }
}

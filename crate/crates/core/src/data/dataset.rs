use std::io::Write;

use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{DataError, FeatureMap, FittedScalers, LoadProfile, MinMaxScaler, SLOTS_PER_DAY};
use crate::demand::{
    expected_demand_curve, total_demand, ArrivalTimeDist, ChargingTimeDist, EmpiricalPmf, ExpectedDemandCurve,
    DEFAULT_GRID_SLOTS, REFERENCE_OUTLET_POWER,
};
use crate::svr::TrainingSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Household load only.
    NoPhev,
    /// Uniform(1, 11) h charging durations.
    UniformTc,
    /// The default empirical charging-duration PMF.
    NonUniformTc,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::NoPhev, ScenarioKind::UniformTc, ScenarioKind::NonUniformTc];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::NoPhev => "no-phev",
            ScenarioKind::UniformTc => "uniform-tc",
            ScenarioKind::NonUniformTc => "non-uniform-tc",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "nophev" | "no-phev" => Ok(ScenarioKind::NoPhev),
            "uniform" | "uniform-tc" => Ok(ScenarioKind::UniformTc),
            "nonuniform" | "non-uniform" | "non-uniform-tc" => Ok(ScenarioKind::NonUniformTc),
            other => Err(DataError::Invalid(format!("unknown scenario `{other}`"))),
        }
    }
}

/// One row group of the experiment table.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    kind: ScenarioKind,
    fleet_size: usize,
    curve: Option<ExpectedDemandCurve>,
}

impl Scenario {
    pub fn no_phev() -> Self {
        Self {
            kind: ScenarioKind::NoPhev,
            fleet_size: 0,
            curve: None,
        }
    }

    pub fn with_curve(kind: ScenarioKind, fleet_size: usize, curve: ExpectedDemandCurve) -> Result<Self, DataError> {
        if kind == ScenarioKind::NoPhev {
            return Err(DataError::Invalid("the no-PHEV scenario carries no demand curve".into()));
        }
        Ok(Self {
            kind,
            fleet_size,
            curve: Some(curve),
        })
    }

    /// The scenario built from the reference arrival and charging parameters.
    pub fn reference(kind: ScenarioKind, fleet_size: usize) -> Self {
        let charging = match kind {
            ScenarioKind::NoPhev => return Self::no_phev(),
            ScenarioKind::UniformTc => ChargingTimeDist::uniform(1.0, 11.0).expect("valid bounds"),
            ScenarioKind::NonUniformTc => {
                ChargingTimeDist::empirical(EmpiricalPmf::default_non_uniform()).expect("valid pmf")
            }
        };
        let curve = expected_demand_curve(
            &ArrivalTimeDist::reference(),
            &charging,
            REFERENCE_OUTLET_POWER,
            DEFAULT_GRID_SLOTS,
        )
        .expect("reference parameters are valid");
        Self {
            kind,
            fleet_size,
            curve: Some(curve),
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn fleet_size(&self) -> usize {
        self.fleet_size
    }

    pub fn curve(&self) -> Option<&ExpectedDemandCurve> {
        self.curve.as_ref()
    }
}

/// Scaled features and targets for one (profile, scenario) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub timestamps: Vec<NaiveDateTime>,
    /// Scaled to `[0, 1]`.
    pub features: Vec<Vec<f64>>,
    /// Scaled to `[0, 1]`.
    pub targets: Vec<f64>,
    /// Unscaled total demand (kW).
    pub targets_kw: Vec<f64>,
    pub scalers: FittedScalers,
    pub feature_map: FeatureMap,
    pub scenario: ScenarioKind,
    pub months: Vec<u32>,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn training_set(&self) -> TrainingSet {
        TrainingSet::new(self.features.clone(), self.targets.clone()).expect("assembled rows are finite and aligned")
    }

    /// Rows `range` as a training set.
    pub fn training_subset(&self, range: std::ops::Range<usize>) -> Result<TrainingSet, DataError> {
        if range.end > self.len() || range.start >= range.end {
            return Err(DataError::Invalid(format!("row range {range:?} is outside 0..{}", self.len())));
        }
        TrainingSet::new(self.features[range.clone()].to_vec(), self.targets[range].to_vec())
            .map_err(|e| DataError::Invalid(e.to_string()))
    }

    /// Writes `timestamp,f1..fn,target_kw` rows with scaled features.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[(&str, String)]) -> std::io::Result<()> {
        for (k, v) in comments {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["timestamp".to_string()];
        header.extend((1..=self.feature_map.dim()).map(|j| format!("f{j}")));
        header.push("target_kw".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.timestamps[i].format("%Y-%m-%dT%H:%M:%S").to_string()];
            rec.extend(self.features[i].iter().map(f64::to_string));
            rec.push(self.targets_kw[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Builds the supervised rows for `profile` under `scenario`.
///
/// Each day's target is household kW plus `fleet_size` times the expected
/// per-vehicle curve; features come from `feature_map`. Scalers are fitted on
/// this dataset alone.
pub fn assemble_dataset(
    profile: &LoadProfile,
    scenario: &Scenario,
    feature_map: FeatureMap,
) -> Result<SupervisedDataset, DataError> {
    let base_kw = profile.kw();
    let mut targets_kw = Vec::with_capacity(base_kw.len());
    match scenario.curve() {
        None => targets_kw.extend_from_slice(&base_kw),
        Some(curve) => {
            if curve.len() != SLOTS_PER_DAY {
                return Err(DataError::ShapeMismatch {
                    expected: SLOTS_PER_DAY,
                    found: curve.len(),
                });
            }
            for day in base_kw.chunks(SLOTS_PER_DAY) {
                let total = total_demand(day, curve, scenario.fleet_size()).map_err(|e| DataError::Invalid(e.to_string()))?;
                targets_kw.extend(total);
            }
        }
    }

    let raw: Vec<Vec<f64>> = profile
        .timestamps()
        .iter()
        .map(|ts| feature_map.build(ts))
        .collect::<Result<_, _>>()?;
    let features_scaler = MinMaxScaler::fit(&raw)?;
    let target_scaler = MinMaxScaler::fit_column(&targets_kw)?;
    let features = raw
        .iter()
        .map(|r| features_scaler.transform(r))
        .collect::<Result<Vec<_>, _>>()?;
    let targets = targets_kw.iter().map(|&t| target_scaler.transform_value(0, t)).collect();

    let mut months: Vec<u32> = profile.timestamps().iter().map(|t| t.month()).collect();
    months.dedup();
    months.sort_unstable();
    months.dedup();

    Ok(SupervisedDataset {
        timestamps: profile.timestamps().to_vec(),
        features,
        targets,
        targets_kw,
        scalers: FittedScalers {
            features: features_scaler,
            target: target_scaler,
        },
        feature_map,
        scenario: scenario.kind(),
        months,
    })
}

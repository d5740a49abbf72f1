use std::f64::consts::PI;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::DataError;

/// How a timestamp becomes a model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMap {
    /// `[q/95, sin(2πq/96), cos(2πq/96), dow/6, weekend, (month−1)/11]`
    /// with `q` the quarter-hour of the day and Monday as day 0.
    #[default]
    Calendar6,
    /// `Calendar6` plus `(day_of_year − 1)/365`.
    CalendarWithDayOfYear,
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Calendar6 => 6,
            FeatureMap::CalendarWithDayOfYear => 7,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureMap::Calendar6 => "calendar6",
            FeatureMap::CalendarWithDayOfYear => "calendar-with-day-of-year",
        }
    }

    pub fn build(&self, ts: &NaiveDateTime) -> Result<Vec<f64>, DataError> {
        if ts.minute() % 15 != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return Err(DataError::OffGrid(ts.to_string()));
        }
        let q = (ts.hour() * 4 + ts.minute() / 15) as f64;
        let dow = ts.weekday().num_days_from_monday();
        let angle = 2.0 * PI * q / 96.0;
        let mut f = vec![
            q / 95.0,
            angle.sin(),
            angle.cos(),
            dow as f64 / 6.0,
            if dow >= 5 { 1.0 } else { 0.0 },
            (ts.month() - 1) as f64 / 11.0,
        ];
        if *self == FeatureMap::CalendarWithDayOfYear {
            f.push((ts.ordinal() - 1) as f64 / 365.0);
        }
        Ok(f)
    }
}

impl std::str::FromStr for FeatureMap {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "calendar6" => Ok(FeatureMap::Calendar6),
            "calendar-with-day-of-year" => Ok(FeatureMap::CalendarWithDayOfYear),
            other => Err(DataError::Invalid(format!("unknown feature map `{other}`"))),
        }
    }
}

/// Default calendar features for one timestamp.
pub fn build_features(ts: &NaiveDateTime) -> Result<Vec<f64>, DataError> {
    FeatureMap::Calendar6.build(ts)
}

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, LoadProfile, SLOTS_PER_DAY, SLOT_HOURS};

/// Knobs for the synthetic household profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Calendar year of the generated timestamps.
    pub year: i32,
    /// Half-width of the multiplicative day-to-day level change.
    pub day_noise: f64,
    /// Half-width of the multiplicative per-slot noise.
    pub slot_noise: f64,
    pub profile_type: String,
    pub weather_zone: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            year: 2014,
            day_noise: 0.0,
            slot_noise: 0.002,
            profile_type: "residential".into(),
            weather_zone: "synthetic".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, v) in [("day_noise", self.day_noise), ("slot_noise", self.slot_noise)] {
            if !(0.0..0.5).contains(&v) {
                return Err(DataError::Invalid(format!("{name} = {v} must be in [0, 0.5)")));
            }
        }
        if NaiveDate::from_ymd_opt(self.year, 1, 1).is_none() {
            return Err(DataError::Invalid(format!("year {} is out of range", self.year)));
        }
        Ok(())
    }
}

/// Gaussian bump on the 24 h circle: (amplitude kW, centre h, width h).
type Bump = (f64, f64, f64);

/// Base level (kW) and bumps for the season containing `month`.
fn season(month: u32) -> (f64, &'static [Bump]) {
    match month {
        12 | 1 | 2 => (1.0, &[(0.9, 7.5, 1.2), (1.3, 19.5, 2.0)]),
        3..=5 => (0.8, &[(0.3, 7.5, 1.2), (0.6, 19.5, 2.2), (0.2, 15.0, 3.0)]),
        6..=8 => (1.2, &[(2.0, 17.0, 3.0), (0.3, 8.0, 1.5)]),
        _ => (0.9, &[(0.3, 7.5, 1.2), (0.8, 18.0, 3.0)]),
    }
}

/// Noise-free load (kW) at hour `h`.
fn shape_kw(month: u32, weekend: bool, h: f64) -> f64 {
    let (base, bumps) = season(month);
    // shallow overnight trough bottoming out at 04:00
    let mut v = base + 0.25 * (1.0 - (2.0 * PI * (h - 4.0) / 24.0).cos());
    for &(amp, centre, width) in bumps {
        // weekend mornings start later and softer
        let (amp, centre) = if weekend && centre < 10.0 {
            (amp * 0.8, centre + 1.5)
        } else {
            (amp, centre)
        };
        let d = (h - centre + 12.0).rem_euclid(24.0) - 12.0;
        v += amp * (-0.5 * (d / width).powi(2)).exp();
    }
    v
}

/// Synthetic household profile with the default [`SynthConfig`].
pub fn synthesize_profile(month: u32, days: usize, seed: u64) -> Result<LoadProfile, DataError> {
    synthesize_profile_with(&SynthConfig::default(), month, days, seed)
}

/// `days` consecutive days starting on the first of `month`.
///
/// Winter has morning and evening peaks, summer a broad late-afternoon
/// cooling peak, spring and autumn sit in between. Noise is multiplicative
/// and bounded, so every reading stays positive. The result depends only on
/// `(config, month, days, seed)`.
pub fn synthesize_profile_with(config: &SynthConfig, month: u32, days: usize, seed: u64) -> Result<LoadProfile, DataError> {
    config.validate()?;
    if !(1..=12).contains(&month) {
        return Err(DataError::Invalid(format!("month {month} is not in 1..=12")));
    }
    if days == 0 {
        return Err(DataError::Invalid("days must be at least 1".into()));
    }
    let start = NaiveDate::from_ymd_opt(config.year, month, 1)
        .expect("validated year")
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(month as u64);

    let mut timestamps = Vec::with_capacity(days * SLOTS_PER_DAY);
    let mut kwh = Vec::with_capacity(days * SLOTS_PER_DAY);
    for d in 0..days {
        let day_start = start + TimeDelta::days(d as i64);
        let weekend = day_start.weekday().num_days_from_monday() >= 5;
        let season_month = day_start.month();
        let level = 1.0 + config.day_noise * (2.0 * rng.random::<f64>() - 1.0);
        for q in 0..SLOTS_PER_DAY {
            let h = q as f64 * SLOT_HOURS;
            let noise = 1.0 + config.slot_noise * (2.0 * rng.random::<f64>() - 1.0);
            let kw = shape_kw(season_month, weekend, h) * level * noise;
            timestamps.push(day_start + TimeDelta::minutes(15 * q as i64));
            kwh.push(kw * SLOT_HOURS);
        }
    }
    let metadata = vec![
        ("profile_type".to_string(), config.profile_type.clone()),
        ("weather_zone".to_string(), config.weather_zone.clone()),
        ("source".to_string(), "synthetic".to_string()),
        ("seed".to_string(), seed.to_string()),
    ];
    LoadProfile::new(timestamps, kwh, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ProfileSource;

    #[test]
    fn deterministic_positive_and_tagged() {
        let a = synthesize_profile(4, 3, 17).unwrap();
        let b = synthesize_profile(4, 3, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synthesize_profile(4, 3, 18).unwrap());
        assert_eq!(a.len(), 288);
        assert!(a.kwh().iter().all(|&e| e > 0.0));
        assert_eq!(a.source(), ProfileSource::Synthetic);
    }

    #[test]
    fn july_peaks_in_the_afternoon() {
        let p = synthesize_profile(7, 31, 1).unwrap();
        for day in p.kwh().chunks(96) {
            let peak = (0..96).max_by(|&i, &j| day[i].total_cmp(&day[j])).unwrap();
            assert!((56..=80).contains(&peak), "peak slot {peak}");
        }
    }

    #[test]
    fn january_evening_peak_dwarfs_the_night() {
        let p = synthesize_profile(1, 31, 1).unwrap();
        for day in p.kwh().chunks(96) {
            let evening = day[68..88].iter().cloned().fold(f64::MIN, f64::max);
            let three_am = day[12];
            assert!(evening / three_am >= 1.5, "{}", evening / three_am);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synthesize_profile(0, 1, 1).is_err());
        assert!(synthesize_profile(13, 1, 1).is_err());
        assert!(synthesize_profile(1, 0, 1).is_err());
        let cfg = SynthConfig {
            slot_noise: 0.7,
            ..SynthConfig::default()
        };
        assert!(synthesize_profile_with(&cfg, 1, 1, 1).is_err());
    }
}

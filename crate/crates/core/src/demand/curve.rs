use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{invalid, wrapped_arrival_pmf, ArrivalTimeDist, ChargingTimeDist, DemandError, DAY_HOURS};

/// One vehicle's charging session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingEvent {
    pub arrival: f64,
    pub duration: f64,
    pub power: f64,
}

impl ChargingEvent {
    pub fn new(arrival: f64, duration: f64, power: f64) -> Result<Self, DemandError> {
        if !(0.0..DAY_HOURS).contains(&arrival) {
            return Err(DemandError::OutOfDay { what: "arrival", value: arrival });
        }
        if !(duration > 0.0 && duration < DAY_HOURS) {
            return Err(invalid("duration", format!("{duration} is not in (0, 24)")));
        }
        if !(power > 0.0) || !power.is_finite() {
            return Err(invalid("power", format!("{power} must be positive")));
        }
        Ok(Self { arrival, duration, power })
    }
}

/// Power drawn by `event` at time of day `t`.
///
/// The window `[arrival, arrival + duration)` is taken on the 24 h circle,
/// so a session that starts in the evening continues past midnight.
pub fn charging_demand(event: &ChargingEvent, t: f64) -> Result<f64, DemandError> {
    if !(0.0..DAY_HOURS).contains(&t) {
        return Err(DemandError::OutOfDay { what: "t", value: t });
    }
    Ok(if (t - event.arrival).rem_euclid(DAY_HOURS) < event.duration {
        event.power
    } else {
        0.0
    })
}

/// Expected demand of one vehicle, one value per grid slot.
///
/// `values[i]` is the average expected power (kW) over
/// `[i·slot_duration, (i+1)·slot_duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedDemandCurve {
    values: Vec<f64>,
    slot_duration: f64,
    outlet_power: f64,
}

impl ExpectedDemandCurve {
    pub(crate) fn from_parts(values: Vec<f64>, outlet_power: f64) -> Self {
        let slot_duration = DAY_HOURS / values.len() as f64;
        Self {
            values,
            slot_duration,
            outlet_power,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn outlet_power(&self) -> f64 {
        self.outlet_power
    }

    /// Daily energy in kWh.
    pub fn energy(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.slot_duration
    }

    /// Largest slot-wise absolute difference.
    pub fn linf_distance(&self, other: &Self) -> Result<f64, DemandError> {
        if self.len() != other.len() {
            return Err(DemandError::ShapeMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Writes `slot_index,hour_start,expected_kw` rows, preceded by any
    /// `# key=value` comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[(&str, String)]) -> std::io::Result<()> {
        for (k, v) in comments {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slot_index", "hour_start", "expected_kw"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([
                i.to_string(),
                (i as f64 * self.slot_duration).to_string(),
                v.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Expected daily demand of one vehicle charging uncoordinated at `power`.
///
/// `values[i] = power · Σ_s pmf[s] · S̄((i − s) mod G)` where `pmf` is the
/// binned arrival distribution and `S̄(d)` is the survival function of the
/// charging time averaged over `[d·h, (d+1)·h)`. Averaging (rather than
/// sampling the survival at `d·h`) makes the slot energies add up to
/// `power · E[T_c]` exactly.
pub fn expected_demand_curve(
    arrival: &ArrivalTimeDist,
    charging: &ChargingTimeDist,
    power: f64,
    grid_slots: usize,
) -> Result<ExpectedDemandCurve, DemandError> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(invalid("power", format!("{power} must be positive")));
    }
    charging.validate()?;
    let pmf = wrapped_arrival_pmf(arrival, grid_slots)?;
    let g = grid_slots;
    let h = DAY_HOURS / g as f64;

    let limited = charging.limited_mean_grid(h, g);
    let avg_survival: Vec<f64> = limited
        .windows(2)
        .map(|w| ((w[1] - w[0]) / h).clamp(0.0, 1.0))
        .collect();

    let values = (0..g)
        .map(|i| {
            let mut acc = 0.0;
            for (s, &p) in pmf.iter().enumerate() {
                let d = (i + g - s) % g;
                acc += p * avg_survival[d];
            }
            (power * acc).clamp(0.0, power)
        })
        .collect();
    Ok(ExpectedDemandCurve::from_parts(values, power))
}

/// Household load plus the expected demand of `n_vehicles` vehicles (kW).
pub fn total_demand(
    base_kw: &[f64],
    fleet_curve: &ExpectedDemandCurve,
    n_vehicles: usize,
) -> Result<Vec<f64>, DemandError> {
    if base_kw.len() != fleet_curve.len() {
        return Err(DemandError::ShapeMismatch {
            expected: fleet_curve.len(),
            found: base_kw.len(),
        });
    }
    if n_vehicles == 0 {
        return Ok(base_kw.to_vec());
    }
    let n = n_vehicles as f64;
    Ok(base_kw
        .iter()
        .zip(fleet_curve.values())
        .map(|(r, e)| r + n * e)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::EmpiricalPmf;

    #[test]
    fn charging_demand_examples() {
        let e = ChargingEvent::new(19.0, 2.0, 2.0).unwrap();
        assert_eq!(charging_demand(&e, 20.0).unwrap(), 2.0);
        assert_eq!(charging_demand(&e, 22.0).unwrap(), 0.0);
        assert_eq!(charging_demand(&e, 21.0).unwrap(), 0.0);
        assert_eq!(charging_demand(&e, 19.0).unwrap(), 2.0);
        assert!(charging_demand(&e, 24.0).is_err());
        assert!(charging_demand(&e, -0.1).is_err());
    }

    #[test]
    fn wrap_case_matches_unrolled_timeline() {
        let e = ChargingEvent::new(23.0, 4.0, 2.0).unwrap();
        assert_eq!(charging_demand(&e, 1.0).unwrap(), 2.0);
        // unrolled oracle on [0, 48): on if t or t + 24 lies in [23, 27)
        for k in 0..96 {
            let t = k as f64 * 0.25;
            let on = [t, t + 24.0].iter().any(|&u| (23.0..27.0).contains(&u));
            let expected = if on { 2.0 } else { 0.0 };
            assert_eq!(charging_demand(&e, t).unwrap(), expected, "t={t}");
        }
    }

    #[test]
    fn degenerate_inputs_give_a_box() {
        let arrival = ArrivalTimeDist::new(19.0, 1e-10).unwrap();
        let charging = ChargingTimeDist::empirical(EmpiricalPmf::point(2.0).unwrap()).unwrap();
        let curve = expected_demand_curve(&arrival, &charging, 2.0, 96).unwrap();
        for (i, &v) in curve.values().iter().enumerate() {
            let expected = if (76..84).contains(&i) { 2.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "slot {i}: {v}");
        }
        assert!((curve.energy() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reference_energy_is_twelve_kwh() {
        let curve = expected_demand_curve(
            &ArrivalTimeDist::reference(),
            &ChargingTimeDist::uniform(1.0, 11.0).unwrap(),
            2.0,
            96,
        )
        .unwrap();
        assert!((curve.energy() - 12.0).abs() < 12.0 * 1e-9);
        assert!(curve.values().iter().all(|&v| (0.0..=2.0).contains(&v)));
    }

    #[test]
    fn total_demand_identities() {
        let curve = ExpectedDemandCurve::from_parts(vec![0.5; 4], 2.0);
        let base = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(total_demand(&base, &curve, 0).unwrap(), base.to_vec());
        assert_eq!(total_demand(&[0.0; 4], &curve, 1).unwrap(), vec![0.5; 4]);
        assert_eq!(total_demand(&base, &curve, 2).unwrap(), vec![2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(
            total_demand(&base[..3], &curve, 1),
            Err(DemandError::ShapeMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn csv_layout() {
        let curve = ExpectedDemandCurve::from_parts(vec![0.0, 1.5], 2.0);
        let mut buf = Vec::new();
        curve.write_csv(&mut buf, &[("config_hash", "abc".into())]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# config_hash=abc\nslot_index,hour_start,expected_kw\n0,0,0\n1,12,1.5\n"
        );
    }
}

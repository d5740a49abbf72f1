use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    charging_demand, invalid, ArrivalTimeDist, ChargingEvent, ChargingTimeDist, DemandError,
    ExpectedDemandCurve, DAY_HOURS,
};

/// Sample-mean demand curve with per-slot standard errors.
#[derive(Debug, Clone)]
pub struct MonteCarloCurve {
    pub curve: ExpectedDemandCurve,
    /// `sqrt(v / n)` with `v` the per-slot sample variance.
    pub std_error: Vec<f64>,
    pub n_samples: usize,
}

/// Brute-force estimate of the expected demand curve.
///
/// Each sample draws an arrival from the continuous wrapped normal, a
/// charging duration, and one offset `u ~ U[0, h)`; slot `i` then records
/// `charging_demand(event, i·h + u)`, an unbiased estimate of the slot
/// average. Nothing here touches the grid convolution used by
/// [`expected_demand_curve`](super::expected_demand_curve).
pub fn monte_carlo_demand_oracle(
    arrival: &ArrivalTimeDist,
    charging: &ChargingTimeDist,
    power: f64,
    grid_slots: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloCurve, DemandError> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    if grid_slots == 0 {
        return Err(invalid("grid_slots", "must be at least 1"));
    }
    charging.validate()?;
    let h = DAY_HOURS / grid_slots as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut on_counts = vec![0u64; grid_slots];

    for _ in 0..n_samples {
        let start = arrival.sample(&mut rng);
        let duration = charging.sample(&mut rng).min(DAY_HOURS * (1.0 - f64::EPSILON));
        let event = ChargingEvent::new(start, duration, power)?;
        let u = h * rng.random::<f64>();
        for (i, count) in on_counts.iter_mut().enumerate() {
            let t = i as f64 * h + u;
            let t = if t >= DAY_HOURS { t - DAY_HOURS } else { t };
            if charging_demand(&event, t)? > 0.0 {
                *count += 1;
            }
        }
    }

    let n = n_samples as f64;
    let mut values = Vec::with_capacity(grid_slots);
    let mut std_error = Vec::with_capacity(grid_slots);
    for &c in &on_counts {
        let frac = c as f64 / n;
        values.push(power * frac);
        // unbiased sample variance of a {0, power} variable
        let var = if n_samples > 1 {
            power * power * frac * (1.0 - frac) * n / (n - 1.0)
        } else {
            0.0
        };
        std_error.push((var / n).sqrt());
    }
    Ok(MonteCarloCurve {
        curve: ExpectedDemandCurve::from_parts(values, power),
        std_error,
        n_samples,
    })
}

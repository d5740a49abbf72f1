use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{invalid, DemandError, DAY_HOURS};
use crate::numeric::std_normal_mass;

/// Truncated tail mass allowed when summing wraps of the normal density.
const WRAP_TAIL: f64 = 1e-12;

/// Vehicle arrival time: a normal distribution folded onto the 24 h circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalTimeDist {
    mu: f64,
    sigma_sq: f64,
}

impl ArrivalTimeDist {
    pub fn new(mu: f64, sigma_sq: f64) -> Result<Self, DemandError> {
        if !mu.is_finite() || !(0.0..DAY_HOURS).contains(&mu) {
            return Err(invalid("mu", format!("{mu} is not in [0, 24)")));
        }
        if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
            return Err(invalid("sigma_sq", format!("{sigma_sq} must be positive")));
        }
        Ok(Self { mu, sigma_sq })
    }

    /// Evening arrivals centred on 19:00 with variance 10 h².
    pub fn reference() -> Self {
        Self {
            mu: super::REFERENCE_ARRIVAL_MEAN,
            sigma_sq: super::REFERENCE_ARRIVAL_VARIANCE,
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    /// Draws an arrival time in `[0, 24)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let t = (self.mu + self.sigma() * z).rem_euclid(DAY_HOURS);
        // rem_euclid can round up to exactly 24.0 for tiny negative inputs
        if t >= DAY_HOURS {
            0.0
        } else {
            t
        }
    }
}

/// Probability mass of the wrapped arrival time in each grid slot.
///
/// Slot `s` is centred on `s · 24/G` hours and covers half a slot on either
/// side, so a point mass at a grid time lands entirely in that slot. Each
/// slot mass sums the normal mass over wraps `k ∈ [-K, K]`, with `K` grown
/// until the omitted tails hold less than `1e-12`.
pub fn wrapped_arrival_pmf(
    dist: &ArrivalTimeDist,
    grid_slots: usize,
) -> Result<Vec<f64>, DemandError> {
    if grid_slots == 0 {
        return Err(invalid("grid_slots", "must be at least 1"));
    }
    let h = DAY_HOURS / grid_slots as f64;
    let sigma = dist.sigma();

    // Offsets are reduced to [-12, 12) before wrapping so that a whole-slot
    // shift of `mu` reproduces the same floating-point arguments.
    let offsets: Vec<f64> = (0..grid_slots)
        .map(|s| {
            let d = (s as f64 * h - dist.mu + 0.5 * DAY_HOURS).rem_euclid(DAY_HOURS);
            d - 0.5 * DAY_HOURS
        })
        .collect();

    let mut pmf = vec![0.0; grid_slots];
    let mut k: i64 = 0;
    loop {
        let wraps: &[i64] = if k == 0 { &[0] } else { &[-k, k] };
        for &w in wraps {
            let shift = w as f64 * DAY_HOURS;
            for (mass, &d) in pmf.iter_mut().zip(&offsets) {
                let lo = (d - 0.5 * h + shift) / sigma;
                let hi = (d + 0.5 * h + shift) / sigma;
                *mass += std_normal_mass(lo, hi);
            }
        }
        // Everything outside (-12 - 24k, 12 + 24k) around the mean is omitted.
        let reach = (0.5 * DAY_HOURS + k as f64 * DAY_HOURS - 0.5 * h) / sigma;
        let omitted = 2.0 * crate::numeric::std_normal_sf(reach);
        if omitted < WRAP_TAIL || k > 10_000 {
            break;
        }
        k += 1;
    }
    Ok(pmf)
}

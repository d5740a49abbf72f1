use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{invalid, DemandError, DAY_HOURS};
use crate::numeric::{bessel_i0e, integrate, std_normal_pdf, std_normal_sf};

/// Largest probability a charging duration may have of reaching 24 h.
pub(crate) const SUPPORT_TAIL: f64 = 1e-6;

/// Charging-time distribution families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChargingFamily {
    Uniform,
    TruncatedGaussian,
    Rician,
    Empirical,
}

impl ChargingFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::TruncatedGaussian => "trunc-gaussian",
            Self::Rician => "rician",
            Self::Empirical => "empirical",
        }
    }
}

impl fmt::Display for ChargingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A histogram of charging durations.
///
/// Mass is spread uniformly inside each bin `[edge_k, edge_{k+1})`; a bin
/// with equal edges is a point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalPmf {
    #[serde(rename = "bin_edges_hours")]
    bin_edges: Vec<f64>,
    masses: Vec<f64>,
}

impl EmpiricalPmf {
    pub fn new(bin_edges: Vec<f64>, masses: Vec<f64>) -> Result<Self, DemandError> {
        let pmf = Self { bin_edges, masses };
        pmf.validate()?;
        Ok(pmf)
    }

    /// A deterministic duration.
    pub fn point(hours: f64) -> Result<Self, DemandError> {
        Self::new(vec![hours, hours], vec![1.0])
    }

    /// Stand-in for the survey-derived charging-time distribution: ten
    /// one-hour bins on `[1, 11)` h, right-skewed with a long-trip tail,
    /// with mean exactly 6 h and variance exactly 25/3 h² (the moments of
    /// `U(1, 11)`).
    pub fn default_non_uniform() -> Self {
        Self {
            bin_edges: (1..=11).map(f64::from).collect(),
            masses: vec![0.02, 0.04, 0.19, 0.36, 0.05, 0.03, 0.02, 0.03, 0.02, 0.24],
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, DemandError> {
        let pmf: Self =
            serde_json::from_str(text).map_err(|e| DemandError::PmfConfig(e.to_string()))?;
        pmf.validate()?;
        Ok(pmf)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DemandError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DemandError::PmfConfig(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("pmf serializes")
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn validate(&self) -> Result<(), DemandError> {
        let (edges, masses) = (&self.bin_edges, &self.masses);
        if masses.is_empty() {
            return Err(invalid("masses", "at least one bin is required"));
        }
        if edges.len() != masses.len() + 1 {
            return Err(invalid(
                "bin_edges_hours",
                format!("{} edges for {} masses", edges.len(), masses.len()),
            ));
        }
        if edges.iter().any(|e| !e.is_finite()) || masses.iter().any(|m| !m.is_finite()) {
            return Err(invalid("bin_edges_hours", "non-finite value"));
        }
        if edges.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("bin_edges_hours", "edges must be non-decreasing"));
        }
        if edges[0] < 0.0 || edges[edges.len() - 1] > DAY_HOURS {
            return Err(invalid("bin_edges_hours", "edges must lie in [0, 24]"));
        }
        for (k, w) in edges.windows(2).enumerate() {
            if w[0] == w[1] && masses[k] > 0.0 && !(w[0] > 0.0 && w[0] < DAY_HOURS) {
                return Err(invalid("bin_edges_hours", "point masses must lie in (0, 24)"));
            }
        }
        if masses.iter().any(|&m| m < 0.0) {
            return Err(invalid("masses", "masses must be non-negative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("masses", format!("masses sum to {total}, not 1")));
        }
        Ok(())
    }

    fn bins(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.bin_edges
            .windows(2)
            .zip(&self.masses)
            .map(|(w, &m)| (w[0], w[1], m))
    }
}

/// `P(X > u)` for `X` uniform on `[a, b]` (a point mass when `a == b`).
fn bin_survival(a: f64, b: f64, u: f64) -> f64 {
    if b > a {
        ((b - u) / (b - a)).clamp(0.0, 1.0)
    } else if a > u {
        1.0
    } else {
        0.0
    }
}

/// `E[min(X, x)]` for `X` uniform on `[a, b]`.
fn bin_limited_mean(a: f64, b: f64, x: f64) -> f64 {
    if x <= a {
        x
    } else if x >= b {
        0.5 * (a + b)
    } else {
        (0.5 * (x * x - a * a) + x * (b - x)) / (b - a)
    }
}

/// Required charging duration `T_c` in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ChargingTimeDist {
    Uniform { low: f64, high: f64 },
    /// Normal `N(mu, sigma²)` conditioned on being positive.
    TruncatedGaussian { mu: f64, sigma: f64 },
    /// Norm of a 2-D normal vector with offset `nu` and per-axis scale `sigma`.
    Rician { nu: f64, sigma: f64 },
    Empirical(EmpiricalPmf),
}

impl ChargingTimeDist {
    pub fn uniform(low: f64, high: f64) -> Result<Self, DemandError> {
        let d = Self::Uniform { low, high };
        d.validate()?;
        Ok(d)
    }

    pub fn truncated_gaussian(mu: f64, sigma: f64) -> Result<Self, DemandError> {
        let d = Self::TruncatedGaussian { mu, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn rician(nu: f64, sigma: f64) -> Result<Self, DemandError> {
        let d = Self::Rician { nu, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(pmf: EmpiricalPmf) -> Result<Self, DemandError> {
        let d = Self::Empirical(pmf);
        d.validate()?;
        Ok(d)
    }

    pub fn family(&self) -> ChargingFamily {
        match self {
            Self::Uniform { .. } => ChargingFamily::Uniform,
            Self::TruncatedGaussian { .. } => ChargingFamily::TruncatedGaussian,
            Self::Rician { .. } => ChargingFamily::Rician,
            Self::Empirical(_) => ChargingFamily::Empirical,
        }
    }

    /// Checks the parameter domain, including that durations stay below 24 h.
    pub fn validate(&self) -> Result<(), DemandError> {
        match self {
            Self::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite()) || !(*low > 0.0 && low < high) {
                    return Err(invalid("uniform", format!("need 0 < low < high, got [{low}, {high}]")));
                }
                if *high > DAY_HOURS {
                    return Err(invalid("uniform", "high must not exceed 24 h"));
                }
            }
            Self::TruncatedGaussian { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(invalid("truncated_gaussian", format!("need finite mu and sigma > 0, got ({mu}, {sigma})")));
                }
                let tail = self.survival(DAY_HOURS);
                if !(tail < SUPPORT_TAIL) {
                    return Err(invalid("truncated_gaussian", format!("P(T_c >= 24 h) = {tail:.3e}")));
                }
            }
            Self::Rician { nu, sigma } => {
                if !(nu.is_finite() && *nu >= 0.0) || !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(invalid("rician", format!("need nu >= 0 and sigma > 0, got ({nu}, {sigma})")));
                }
                let tail = self.survival(DAY_HOURS);
                if !(tail < SUPPORT_TAIL) {
                    return Err(invalid("rician", format!("P(T_c >= 24 h) = {tail:.3e}")));
                }
            }
            Self::Empirical(pmf) => pmf.validate()?,
        }
        Ok(())
    }

    /// Density for the continuous families; `None` for histograms.
    pub fn density(&self, u: f64) -> Option<f64> {
        match *self {
            Self::Uniform { low, high } => Some(if (low..high).contains(&u) { 1.0 / (high - low) } else { 0.0 }),
            Self::TruncatedGaussian { mu, sigma } => Some(if u < 0.0 {
                0.0
            } else {
                std_normal_pdf((u - mu) / sigma) / (sigma * std_normal_sf(-mu / sigma))
            }),
            Self::Rician { nu, sigma } => Some(rician_pdf(nu, sigma, u)),
            Self::Empirical(_) => None,
        }
    }

    /// `P(T_c > u)`.
    pub fn survival(&self, u: f64) -> f64 {
        match self {
            Self::Uniform { low, high } => bin_survival(*low, *high, u),
            Self::TruncatedGaussian { mu, sigma } => {
                if u <= 0.0 {
                    1.0
                } else {
                    (std_normal_sf((u - mu) / sigma) / std_normal_sf(-mu / sigma)).min(1.0)
                }
            }
            Self::Rician { nu, sigma } => rician_survival(*nu, *sigma, u),
            Self::Empirical(pmf) => pmf
                .bins()
                .map(|(a, b, m)| m * bin_survival(a, b, u))
                .sum::<f64>()
                .min(1.0),
        }
    }

    /// `E[min(T_c, x)] = ∫₀ˣ P(T_c > u) du`.
    pub fn limited_mean(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Uniform { low, high } => bin_limited_mean(*low, *high, x),
            Self::TruncatedGaussian { mu, sigma } => {
                // ∫ Q(z) dz = z Q(z) − φ(z)
                let anti = |z: f64| z * std_normal_sf(z) - std_normal_pdf(z);
                let z0 = -mu / sigma;
                let zx = (x - mu) / sigma;
                sigma * (anti(zx) - anti(z0)) / std_normal_sf(z0)
            }
            Self::Rician { nu, sigma } => {
                let [mass, first] = rician_partial_moments(*nu, *sigma, 0.0, x);
                x * (1.0 - mass) + first
            }
            Self::Empirical(pmf) => pmf.bins().map(|(a, b, m)| m * bin_limited_mean(a, b, x)).sum(),
        }
    }

    /// `E[min(T_c, k·h)]` for `k = 0..=n`, computed incrementally.
    pub(crate) fn limited_mean_grid(&self, h: f64, n: usize) -> Vec<f64> {
        match self {
            Self::Rician { nu, sigma } => {
                let mut out = Vec::with_capacity(n + 1);
                let (mut mass, mut first) = (0.0, 0.0);
                out.push(0.0);
                for k in 1..=n {
                    let [dm, df] = rician_partial_moments(*nu, *sigma, (k - 1) as f64 * h, k as f64 * h);
                    mass += dm;
                    first += df;
                    let x = k as f64 * h;
                    out.push(x * (1.0 - mass).max(0.0) + first);
                }
                out
            }
            _ => (0..=n).map(|k| self.limited_mean(k as f64 * h)).collect(),
        }
    }

    /// Mean and variance. Continuous families are integrated numerically.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            Self::Uniform { low, high } => (0.5 * (low + high), (high - low).powi(2) / 12.0),
            Self::Empirical(pmf) => {
                let mean: f64 = pmf.bins().map(|(a, b, m)| m * 0.5 * (a + b)).sum();
                let second: f64 = pmf.bins().map(|(a, b, m)| m * (a * a + a * b + b * b) / 3.0).sum();
                (mean, (second - mean * mean).max(0.0))
            }
            Self::TruncatedGaussian { mu, sigma } => {
                let lo = (mu - 40.0 * sigma).max(0.0);
                let hi = (mu + 40.0 * sigma).max(lo + sigma);
                continuous_moments(|u| self.density(u).unwrap_or(0.0), lo, hi)
            }
            Self::Rician { nu, sigma } => {
                let lo = (nu - 40.0 * sigma).max(0.0);
                let hi = nu + 40.0 * sigma;
                continuous_moments(|u| rician_pdf(*nu, *sigma, u), lo, hi)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    /// Upper end of the support, when bounded.
    pub fn support_upper(&self) -> Option<f64> {
        match self {
            Self::Uniform { high, .. } => Some(*high),
            Self::Empirical(pmf) => pmf
                .bins()
                .filter(|&(_, _, m)| m > 0.0)
                .map(|(_, b, _)| b)
                .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b)))),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Self::TruncatedGaussian { mu, sigma } => {
                let normal = Normal::new(*mu, *sigma).expect("validated");
                let lo = normal.cdf(0.0);
                loop {
                    let p = lo + (1.0 - lo) * rng.random::<f64>();
                    let x = normal.inverse_cdf(p);
                    if x > 0.0 && x.is_finite() {
                        return x;
                    }
                }
            }
            Self::Rician { nu, sigma } => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (nu + sigma * a).hypot(sigma * b)
            }
            Self::Empirical(pmf) => {
                let p = rng.random::<f64>();
                let mut acc = 0.0;
                let mut last = None;
                for (a, b, m) in pmf.bins() {
                    if m <= 0.0 {
                        continue;
                    }
                    last = Some((a, b, acc, m));
                    if p < acc + m {
                        let frac = (p - acc) / m;
                        return a + (b - a) * frac;
                    }
                    acc += m;
                }
                // p landed in the rounding slack above the final cumulative mass
                let (a, b, _, _) = last.expect("validated pmf has positive mass");
                a + (b - a) * rng.random::<f64>()
            }
        }
    }
}

fn rician_pdf(nu: f64, sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    let d = x - nu;
    (x / s2) * (-(d * d) / (2.0 * s2)).exp() * bessel_i0e(x * nu / s2)
}

/// `[∫ f, ∫ u f]` of the Rician density over `[a, b]`.
fn rician_partial_moments(nu: f64, sigma: f64, a: f64, b: f64) -> [f64; 2] {
    if b <= a {
        return [0.0, 0.0];
    }
    let panels = ((b - a) / (0.5 * sigma)).ceil() as usize + 1;
    let mass = integrate(|u| rician_pdf(nu, sigma, u), a, b, panels);
    let first = integrate(|u| u * rician_pdf(nu, sigma, u), a, b, panels);
    [mass, first]
}

fn rician_survival(nu: f64, sigma: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    let hi = nu.max(u) + 12.0 * sigma;
    let panels = |a: f64, b: f64| ((b - a) / (0.5 * sigma)).ceil() as usize + 1;
    let pdf = |x: f64| rician_pdf(nu, sigma, x);
    // integrate whichever side is shorter relative to the bulk of the mass
    if u > nu {
        integrate(pdf, u, hi, panels(u, hi)).clamp(0.0, 1.0)
    } else {
        (1.0 - integrate(pdf, 0.0, u, panels(0.0, u))).clamp(0.0, 1.0)
    }
}

fn continuous_moments<F: Fn(f64) -> f64>(pdf: F, lo: f64, hi: f64) -> (f64, f64) {
    let panels = 160;
    let mass = integrate(&pdf, lo, hi, panels);
    let mean = integrate(|u| u * pdf(u), lo, hi, panels) / mass;
    let var = integrate(|u| (u - mean) * (u - mean) * pdf(u), lo, hi, panels) / mass;
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_survival_examples() {
        let d = ChargingTimeDist::uniform(1.0, 11.0).unwrap();
        assert_eq!(d.survival(6.0), 0.5);
        assert_eq!(d.survival(12.0), 0.0);
        assert_eq!(d.survival(0.0), 1.0);
        assert_eq!(d.moments(), (6.0, 25.0 / 3.0));
    }

    #[test]
    fn constructors_enforce_domain() {
        assert!(ChargingTimeDist::uniform(0.0, 2.0).is_err());
        assert!(ChargingTimeDist::uniform(3.0, 2.0).is_err());
        assert!(ChargingTimeDist::uniform(1.0, 25.0).is_err());
        assert!(ChargingTimeDist::truncated_gaussian(6.0, 0.0).is_err());
        assert!(ChargingTimeDist::truncated_gaussian(20.0, 3.0).is_err());
        assert!(ChargingTimeDist::rician(-1.0, 1.0).is_err());
        assert!(ChargingTimeDist::rician(20.0, 3.0).is_err());
        assert!(EmpiricalPmf::new(vec![1.0, 2.0], vec![0.5]).is_err());
        assert!(EmpiricalPmf::new(vec![1.0, 2.0, 3.0], vec![0.5]).is_err());
        assert!(EmpiricalPmf::new(vec![2.0, 1.0], vec![1.0]).is_err());
        assert!(EmpiricalPmf::new(vec![1.0, 2.0, 3.0], vec![1.5, -0.5]).is_err());
        assert!(EmpiricalPmf::point(0.0).is_err());
        assert!(EmpiricalPmf::point(2.0).is_ok());
    }

    #[test]
    fn default_non_uniform_has_reference_moments() {
        let d = ChargingTimeDist::empirical(EmpiricalPmf::default_non_uniform()).unwrap();
        let (m, v) = d.moments();
        assert!((m - 6.0).abs() < 1e-12);
        assert!((v - 25.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_json_is_strict() {
        let ok = r#"{"bin_edges_hours": [1, 2, 3], "masses": [0.25, 0.75]}"#;
        assert!(EmpiricalPmf::from_json_str(ok).is_ok());
        let extra = r#"{"bin_edges_hours": [1, 2], "masses": [1.0], "note": 1}"#;
        assert!(EmpiricalPmf::from_json_str(extra).is_err());
        let bad_sum = r#"{"bin_edges_hours": [1, 2, 3], "masses": [0.25, 0.7]}"#;
        assert!(EmpiricalPmf::from_json_str(bad_sum).is_err());
        let pmf = EmpiricalPmf::default_non_uniform();
        assert_eq!(EmpiricalPmf::from_json_str(&pmf.to_json_string()).unwrap(), pmf);
    }

    #[test]
    fn truncated_gaussian_moments_match_closed_form() {
        let (mu, sigma) = (5.0, 3.0);
        let d = ChargingTimeDist::truncated_gaussian(mu, sigma).unwrap();
        let alpha = -mu / sigma;
        let lambda = std_normal_pdf(alpha) / std_normal_sf(alpha);
        let mean = mu + sigma * lambda;
        let var = sigma * sigma * (1.0 + alpha * lambda - lambda * lambda);
        let (m, v) = d.moments();
        assert!((m - mean).abs() < 1e-12 * mean);
        assert!((v - var).abs() < 1e-11 * var);
    }

    #[test]
    fn limited_mean_is_integral_of_survival() {
        let families = [
            ChargingTimeDist::uniform(1.0, 11.0).unwrap(),
            ChargingTimeDist::truncated_gaussian(5.77, 3.12).unwrap(),
            ChargingTimeDist::rician(4.4, 3.5).unwrap(),
            ChargingTimeDist::empirical(EmpiricalPmf::default_non_uniform()).unwrap(),
        ];
        for d in &families {
            for &x in &[0.3, 2.0, 6.5, 13.0, 24.0] {
                // trapezoid on a fine grid as an independent route
                let n = 20_000;
                let h = x / n as f64;
                let mut acc = 0.5 * (d.survival(0.0) + d.survival(x));
                for k in 1..n {
                    acc += d.survival(k as f64 * h);
                }
                let trap = acc * h;
                assert!((d.limited_mean(x) - trap).abs() < 1e-6, "{:?} x={x}", d.family());
            }
            let grid = d.limited_mean_grid(0.25, 96);
            for (k, g) in grid.iter().enumerate() {
                assert!((g - d.limited_mean(k as f64 * 0.25)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn survival_at_zero_is_one_and_vanishes_past_support() {
        let d = ChargingTimeDist::empirical(EmpiricalPmf::point(2.0).unwrap()).unwrap();
        assert_eq!(d.survival(1.999), 1.0);
        assert_eq!(d.survival(2.0), 0.0);
        assert_eq!(d.limited_mean(5.0), 2.0);
        let d = ChargingTimeDist::rician(4.4, 3.5).unwrap();
        assert!((d.survival(0.0) - 1.0).abs() < 1e-15);
        assert!(d.survival(24.0) < SUPPORT_TAIL);
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tg = ChargingTimeDist::truncated_gaussian(0.5, 2.0).unwrap();
        let pmf = ChargingTimeDist::empirical(EmpiricalPmf::new(vec![1.0, 1.0, 3.0], vec![0.5, 0.5]).unwrap()).unwrap();
        for _ in 0..10_000 {
            assert!(tg.sample(&mut rng) > 0.0);
            let x = pmf.sample(&mut rng);
            assert!(x == 1.0 || (1.0..3.0).contains(&x));
        }
    }
}

use super::{invalid, ChargingFamily, ChargingTimeDist, DemandError};

const MAX_ITERATIONS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-12;

/// Finds the member of `family` with the given mean (hours) and variance
/// (hours²).
///
/// Uniform inverts `(a+b)/2, (b−a)²/12` directly. The truncated Gaussian and
/// Rician families are solved by damped Newton iteration on the relative
/// `(mean, variance)` residuals, with moments from numerical integration
/// and a central-difference Jacobian.
pub fn moment_match(
    family: ChargingFamily,
    target_mean: f64,
    target_var: f64,
) -> Result<ChargingTimeDist, DemandError> {
    if !(target_mean > 0.0) || !target_mean.is_finite() {
        return Err(invalid("target_mean", format!("{target_mean} must be positive")));
    }
    if !(target_var > 0.0) || !target_var.is_finite() {
        return Err(invalid("target_var", format!("{target_var} must be positive")));
    }
    // largest coefficient of variation each family can reach: the Rayleigh
    // limit for Rician, the exponential limit for the truncated Gaussian
    let cv = target_var.sqrt() / target_mean;
    let cv_limit = match family {
        ChargingFamily::Rician => (4.0 / std::f64::consts::PI - 1.0).sqrt(),
        ChargingFamily::TruncatedGaussian => 1.0,
        _ => f64::INFINITY,
    };
    if cv >= cv_limit {
        return Err(DemandError::InfeasibleTarget {
            family,
            mean: target_mean,
            variance: target_var,
            residual: f64::INFINITY,
            iterations: 0,
        });
    }
    match family {
        ChargingFamily::Uniform => {
            let half = (3.0 * target_var).sqrt();
            ChargingTimeDist::uniform(target_mean - half, target_mean + half)
        }
        ChargingFamily::TruncatedGaussian => {
            let build = |p: [f64; 2]| ChargingTimeDist::TruncatedGaussian { mu: p[0], sigma: p[1].exp() };
            let start = [target_mean, target_var.sqrt().ln()];
            let p = newton(family, target_mean, target_var, start, build)?;
            ChargingTimeDist::truncated_gaussian(p[0], p[1].exp())
        }
        ChargingFamily::Rician => {
            let build = |p: [f64; 2]| ChargingTimeDist::Rician { nu: p[0].abs(), sigma: p[1].exp() };
            let nu0 = (target_mean * target_mean - target_var).max(0.25 * target_mean * target_mean).sqrt();
            let start = [nu0, target_var.sqrt().ln()];
            let p = newton(family, target_mean, target_var, start, build)?;
            ChargingTimeDist::rician(p[0].abs(), p[1].exp())
        }
        ChargingFamily::Empirical => Err(invalid(
            "family",
            "empirical distributions are loaded from data, not moment-matched",
        )),
    }
}

fn residual<F: Fn([f64; 2]) -> ChargingTimeDist>(build: &F, p: [f64; 2], mean: f64, var: f64) -> [f64; 2] {
    let (m, v) = build(p).moments();
    [(m - mean) / mean, (v - var) / var]
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

fn newton<F: Fn([f64; 2]) -> ChargingTimeDist>(
    family: ChargingFamily,
    mean: f64,
    var: f64,
    start: [f64; 2],
    build: F,
) -> Result<[f64; 2], DemandError> {
    let mut p = start;
    let mut r = residual(&build, p, mean, var);
    let mut iterations = 0;
    while !(norm(r) < RESIDUAL_TOL) {
        if iterations == MAX_ITERATIONS || !norm(r).is_finite() {
            return Err(DemandError::InfeasibleTarget {
                family,
                mean,
                variance: var,
                residual: norm(r),
                iterations,
            });
        }
        iterations += 1;

        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let step = 1e-6 * p[k].abs().max(1.0);
            let mut hi = p;
            let mut lo = p;
            hi[k] += step;
            lo[k] -= step;
            let (rh, rl) = (residual(&build, hi, mean, var), residual(&build, lo, mean, var));
            for row in 0..2 {
                jac[row][k] = (rh[row] - rl[row]) / (2.0 * step);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(DemandError::InfeasibleTarget {
                family,
                mean,
                variance: var,
                residual: norm(r),
                iterations,
            });
        }
        let dx = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];

        // backtrack until the residual shrinks
        let mut t = 1.0;
        loop {
            let cand = [p[0] + t * dx[0], p[1] + t * dx[1]];
            let rc = residual(&build, cand, mean, var);
            if norm(rc).is_finite() && norm(rc) < norm(r) {
                p = cand;
                r = rc;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                return Err(DemandError::InfeasibleTarget {
                    family,
                    mean,
                    variance: var,
                    residual: norm(r),
                    iterations,
                });
            }
        }
    }
    Ok(p)
}

//! Small numerical kernels shared by the demand model: standard normal
//! functions, composite Gauss-Legendre quadrature and the exponentially
//! scaled modified Bessel function `I0`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use statrs::function::erf::erfc;

const GL_ORDER: usize = 20;

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in the lower tail.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal survival `1 - Φ(z)`, accurate in the upper tail.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `Φ(b) - Φ(a)` for `a <= b`, evaluated on whichever tail keeps precision.
pub fn std_normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

fn gauss_legendre() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n.div_ceil(2) {
            // Newton on P_n starting from the Chebyshev-like guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

/// Integrates `f` over `[a, b]` with a composite 20-point Gauss-Legendre rule
/// on `panels` equal sub-intervals.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre();
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            acc += w * f(mid + half * x);
        }
        total += acc * half;
    }
    total
}

/// `exp(-x) * I0(x)` for `x >= 0`.
///
/// Uses the trapezoid rule on `(1/π)∫₀^π exp(x(cos θ − 1)) dθ`, which is
/// spectrally accurate for this periodic integrand, and the asymptotic
/// expansion for large arguments.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x > 60.0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let odd = (2 * k - 1) as f64;
            let next = term * odd * odd / (8.0 * k as f64 * x);
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum {
                break;
            }
        }
        return sum / (2.0 * PI * x).sqrt();
    }
    let m = 32 + x.ceil() as usize;
    let mut acc = 0.5 * (1.0 + (-2.0 * x).exp());
    for k in 1..m {
        let theta = PI * k as f64 / m as f64;
        acc += (x * (theta.cos() - 1.0)).exp();
    }
    acc / m as f64
}

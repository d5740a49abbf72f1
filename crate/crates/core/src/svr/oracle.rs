//! Slow, independent dual solver for small problems.
//!
//! Works directly on `β = α − α*` with the constraint set
//! `Σβ = 0, |β_i| ≤ C/N, Σ|β_i| ≤ Cν`: accelerated projected gradient with an
//! exact Euclidean projection, followed by an equality-constrained Newton
//! polish on the detected active set. Shares no code with the working-set
//! solver beyond the kernel function.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DualSolution, KernelSpec, NuSvrParams, SvrError, TrainingSet};

pub const ORACLE_MAX_SAMPLES: usize = 30;

const RESTART_AGREEMENT: f64 = 1e-8;
const ROUNDS: usize = 40;
const STEPS_PER_ROUND: usize = 2_000;

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub beta: Vec<f64>,
    /// The same point split into `α, α*` with each block summing to `Cν/2`.
    pub duals: DualSolution,
    pub objective: f64,
    /// Converged objective of each random restart.
    pub restart_objectives: [f64; 2],
}

struct Problem {
    k: DMatrix<f64>,
    t: DVector<f64>,
    u: f64,
    radius: f64,
    lipschitz: f64,
}

impl Problem {
    fn objective(&self, beta: &DVector<f64>) -> f64 {
        0.5 * beta.dot(&(&self.k * beta)) - self.t.dot(beta)
    }

    fn feasible(&self, beta: &DVector<f64>) -> bool {
        let slack = 1e-12 * self.u.max(1.0);
        beta.iter().all(|b| b.abs() <= self.u + slack)
            && beta.sum().abs() <= slack * beta.len() as f64
            && beta.iter().map(|b| b.abs()).sum::<f64>() <= self.radius + slack * beta.len() as f64
    }
}

/// Solves the ν-SVR dual by brute force. Refuses more than
/// [`ORACLE_MAX_SAMPLES`] samples.
pub fn brute_force_qp_oracle(
    data: &TrainingSet,
    params: &NuSvrParams,
    kernel: &KernelSpec,
) -> Result<OracleSolution, SvrError> {
    params.validate()?;
    kernel.validate()?;
    let n = data.len();
    if n > ORACLE_MAX_SAMPLES {
        return Err(SvrError::OracleTooLarge {
            n,
            max: ORACLE_MAX_SAMPLES,
        });
    }
    let k = DMatrix::from_fn(n, n, |i, j| kernel.eval_unchecked(&data.inputs()[i], &data.inputs()[j]));
    let lipschitz = SymmetricEigen::new(k.clone()).eigenvalues.max().max(1e-12);
    let problem = Problem {
        k,
        t: DVector::from_column_slice(data.targets()),
        u: params.upper_bound(n),
        radius: params.c * params.nu,
        lipschitz,
    };

    let mut runs = Vec::with_capacity(2);
    for seed in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + seed);
        let z = DVector::from_fn(n, |_, _| problem.u * (2.0 * rng.random::<f64>() - 1.0));
        let (start, _) = project(&z, problem.u, problem.radius, 0.0);
        runs.push(minimize(&problem, start));
    }
    let (f0, f1) = (problem.objective(&runs[0]), problem.objective(&runs[1]));
    if (f0 - f1).abs() > RESTART_AGREEMENT {
        return Err(SvrError::OracleDisagreement { first: f0, second: f1 });
    }
    let beta = if f0 <= f1 { runs.swap_remove(0) } else { runs.swap_remove(1) };
    let objective = f0.min(f1);
    let duals = split_beta(beta.as_slice(), params.upper_bound(n), params.c * params.nu);
    Ok(OracleSolution {
        beta: beta.as_slice().to_vec(),
        duals,
        objective,
        restart_objectives: [f0, f1],
    })
}

fn minimize(p: &Problem, start: DVector<f64>) -> DVector<f64> {
    let mut best = start;
    let mut best_f = p.objective(&best);
    let mut mu = 0.0;
    let mut quiet_rounds = 0;
    for _ in 0..ROUNDS {
        let before = best_f;

        // accelerated projected gradient with function-value restart
        let mut x = best.clone();
        let mut fx = best_f;
        let mut y = x.clone();
        let mut theta = 1.0f64;
        for _ in 0..STEPS_PER_ROUND {
            let grad = &p.k * &y - &p.t;
            let (next, m) = project(&(&y - grad / p.lipschitz), p.u, p.radius, mu);
            mu = m;
            let fnext = p.objective(&next);
            if fnext > fx {
                y = x.clone();
                theta = 1.0;
                continue;
            }
            let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
            y = &next + (&next - &x) * ((theta - 1.0) / theta_next);
            theta = theta_next;
            x = next;
            fx = fnext;
        }
        if fx < best_f {
            best = x;
            best_f = fx;
        }

        for cand in polish_candidates(p, &best) {
            let f = p.objective(&cand);
            if f < best_f {
                best = cand;
                best_f = f;
            }
        }

        if before - best_f <= 1e-14 * best_f.abs().max(1.0) {
            quiet_rounds += 1;
            if quiet_rounds >= 2 {
                break;
            }
        } else {
            quiet_rounds = 0;
        }
    }
    best
}

/// Solves the equality-constrained QP on guessed active sets; returns the
/// feasible results.
fn polish_candidates(p: &Problem, beta: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = beta.len();
    let mut out = Vec::new();
    for rel in [1e-3, 1e-5, 1e-7, 1e-9] {
        let thr = rel * p.u;
        let mut fixed = vec![None; n];
        let mut free = Vec::new();
        for i in 0..n {
            let b = beta[i];
            if b >= p.u - thr {
                fixed[i] = Some(p.u);
            } else if b <= -p.u + thr {
                fixed[i] = Some(-p.u);
            } else if b.abs() <= thr {
                fixed[i] = Some(0.0);
            } else {
                free.push(i);
            }
        }
        for l1_active in [false, true] {
            if let Some(c) = solve_active_set(p, beta, &fixed, &free, l1_active) {
                if p.feasible(&c) {
                    out.push(c);
                }
            }
        }
    }
    out
}

fn solve_active_set(
    p: &Problem,
    beta: &DVector<f64>,
    fixed: &[Option<f64>],
    free: &[usize],
    l1_active: bool,
) -> Option<DVector<f64>> {
    let n = beta.len();
    let m = free.len();
    let extra = if l1_active { 2 } else { 1 };
    let mut full = DVector::from_fn(n, |i, _| fixed[i].unwrap_or(0.0));
    if m == 0 {
        return Some(full);
    }
    let dim = m + extra;
    let mut a = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[(r, c)] = p.k[(i, j)];
        }
        let coupled: f64 = (0..n).filter_map(|j| fixed[j].map(|v| p.k[(i, j)] * v)).sum();
        rhs[r] = p.t[i] - coupled;
        a[(r, m)] = 1.0;
        a[(m, r)] = 1.0;
        if l1_active {
            let s = beta[i].signum();
            a[(r, m + 1)] = s;
            a[(m + 1, r)] = s;
        }
    }
    let fixed_sum: f64 = fixed.iter().flatten().sum();
    rhs[m] = -fixed_sum;
    if l1_active {
        let fixed_l1: f64 = fixed.iter().flatten().map(|v| v.abs()).sum();
        rhs[m + 1] = p.radius - fixed_l1;
    }
    let sol = a.svd(true, true).solve(&rhs, 1e-14).ok()?;
    for (r, &i) in free.iter().enumerate() {
        let v = sol[r];
        if !v.is_finite() || (l1_active && v * beta[i].signum() < 0.0) {
            return None;
        }
        full[i] = v.clamp(-p.u, p.u);
    }
    Some(full)
}

/// Euclidean projection onto `{Σβ = 0, |β_i| ≤ u, Σ|β_i| ≤ radius}`.
///
/// The minimizer is `clip(soft(z − λ, μ), −u, u)` with `λ` fixing the sum
/// and `μ ≥ 0` the ℓ1 multiplier; `mu_hint` warm-starts the search for
/// `μ`. Returns the projection and the multiplier used.
fn project(z: &DVector<f64>, u: f64, radius: f64, mu_hint: f64) -> (DVector<f64>, f64) {
    let at = |mu: f64| {
        let lambda = sum_root(z, u, mu);
        let beta = z.map(|zi| shrink(zi - lambda, u, mu));
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        (beta, l1)
    };
    let (beta0, l1_0) = at(0.0);
    if l1_0 <= radius {
        return (beta0, 0.0);
    }
    // ℓ1(μ) is continuous, piecewise linear and non-increasing; bracket then
    // regula falsi (Illinois) on it
    let spread = z.max() - z.min() + 1.0;
    let (mut lo, mut f_lo) = (0.0, l1_0 - radius);
    let (mut hi, mut f_hi) = (spread, -radius);
    if mu_hint > 0.0 && mu_hint < spread {
        let (_, l1) = at(mu_hint);
        if l1 > radius {
            lo = mu_hint;
            f_lo = l1 - radius;
        } else {
            hi = mu_hint;
            f_hi = l1 - radius;
        }
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let mut mid = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let (beta, l1) = at(mid);
        let f = l1 - radius;
        if f.abs() <= 1e-15 * radius || hi - lo <= 1e-16 * hi {
            return (beta, mid);
        }
        if f > 0.0 {
            lo = mid;
            f_lo = f;
            if side == 1 {
                f_hi /= 2.0;
            }
            side = 1;
        } else {
            hi = mid;
            f_hi = f;
            if side == -1 {
                f_lo /= 2.0;
            }
            side = -1;
        }
    }
    let (beta, _) = at(hi);
    (beta, hi)
}

fn shrink(v: f64, u: f64, mu: f64) -> f64 {
    (v.signum() * (v.abs() - mu).max(0.0)).clamp(-u, u)
}

/// The `λ` with `Σ shrink(z_i − λ) = 0`, found exactly from the breakpoints
/// of the piecewise-linear sum.
fn sum_root(z: &DVector<f64>, u: f64, mu: f64) -> f64 {
    let total = |lambda: f64| z.iter().map(|&zi| shrink(zi - lambda, u, mu)).sum::<f64>();
    let mut points: Vec<f64> = z
        .iter()
        .flat_map(|&zi| [zi - mu - u, zi - mu, zi + mu, zi + mu + u])
        .collect();
    points.sort_by(f64::total_cmp);
    // total is non-increasing in λ: positive left of the root, negative right
    let mut prev = (points[0], total(points[0]));
    if prev.1 <= 0.0 {
        return prev.0;
    }
    for &p in &points[1..] {
        let cur = (p, total(p));
        if cur.1 <= 0.0 {
            if cur.1 == prev.1 {
                return cur.0;
            }
            return prev.0 + (cur.0 - prev.0) * prev.1 / (prev.1 - cur.1);
        }
        prev = cur;
    }
    prev.0
}

/// Writes `β` as `α − α*` with both blocks summing to `radius/2`.
///
/// The shared slack needed to fill the blocks goes to samples with `β_i = 0`
/// first. When the ℓ1 bound is active (within rounding) no slack is added.
fn split_beta(beta: &[f64], u: f64, radius: f64) -> DualSolution {
    let mut alpha: Vec<f64> = beta.iter().map(|b| b.max(0.0)).collect();
    let mut alpha_star: Vec<f64> = beta.iter().map(|b| (-b).max(0.0)).collect();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let mut slack = (radius - l1) / 2.0;
    if slack > 1e-9 * radius {
        let mut order: Vec<usize> = (0..beta.len()).collect();
        order.sort_by(|&i, &j| beta[i].abs().total_cmp(&beta[j].abs()));
        for i in order {
            if slack <= 0.0 {
                break;
            }
            let room = (u - beta[i].abs()).min(slack);
            alpha[i] += room;
            alpha_star[i] += room;
            slack -= room;
        }
    }
    DualSolution { alpha, alpha_star }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_lands_in_the_set_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = 2 + (rng.random::<u32>() % 12) as usize;
            let u = 0.1 + rng.random::<f64>();
            let radius = u * n as f64 * rng.random::<f64>();
            let z = DVector::from_fn(n, |_, _| 4.0 * rng.random::<f64>() - 2.0);
            let (p, _) = project(&z, u, radius, 0.0);
            assert!(p.sum().abs() < 1e-12);
            assert!(p.iter().all(|b| b.abs() <= u + 1e-15));
            assert!(p.iter().map(|b| b.abs()).sum::<f64>() <= radius + 1e-11);
            let (q, _) = project(&p, u, radius, 0.0);
            assert!((&p - &q).amax() < 1e-10);
            // the projection is no farther from z than random feasible points
            let d = (&z - &p).norm();
            for _ in 0..20 {
                let w = DVector::from_fn(n, |_, _| 4.0 * rng.random::<f64>() - 2.0);
                let (f, _) = project(&w, u, radius, 0.0);
                assert!(d <= (&z - &f).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn refuses_large_problems() {
        let xs: Vec<Vec<f64>> = (0..31).map(|i| vec![i as f64]).collect();
        let data = TrainingSet::new(xs, vec![0.0; 31]).unwrap();
        let params = NuSvrParams::new(1.0, 0.5).unwrap();
        assert!(matches!(
            brute_force_qp_oracle(&data, &params, &KernelSpec::Linear),
            Err(SvrError::OracleTooLarge { n: 31, max: 30 })
        ));
    }

    #[test]
    fn constant_targets_give_zero_objective() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 4.0]).collect();
        let data = TrainingSet::new(xs, vec![0.7; 5]).unwrap();
        let params = NuSvrParams::new(10.0, 0.5).unwrap();
        let sol = brute_force_qp_oracle(&data, &params, &KernelSpec::Rbf { gamma: 10.0 }).unwrap();
        assert!(sol.objective.abs() < 1e-12, "{}", sol.objective);
        assert!(sol.beta.iter().all(|b| b.abs() < 1e-9));
    }

    #[test]
    fn symmetric_pair_gives_symmetric_duals() {
        let data = TrainingSet::new(vec![vec![0.2], vec![0.8]], vec![0.5, -0.5]).unwrap();
        let params = NuSvrParams::new(2.0, 0.5).unwrap();
        let sol = brute_force_qp_oracle(&data, &params, &KernelSpec::Rbf { gamma: 10.0 }).unwrap();
        assert!((sol.beta[0] + sol.beta[1]).abs() < 1e-12);
        assert!(sol.beta[0] > 0.0);
        assert!((sol.duals.alpha[0] - sol.duals.alpha_star[1]).abs() < 1e-12);
        assert!((sol.duals.alpha_star[0] - sol.duals.alpha[1]).abs() < 1e-12);
    }
}

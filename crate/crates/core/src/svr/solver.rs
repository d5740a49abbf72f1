use serde::{Deserialize, Serialize};

use super::kernel::KernelRows;
use super::{gram_matrix, KernelSpec, NuSvrParams, SvrError, SvrModel, TrainingSet};

const TAU: f64 = 1e-12;

/// The two blocks of dual variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
}

impl DualSolution {
    pub fn zeros(n: usize) -> Self {
        Self {
            alpha: vec![0.0; n],
            alpha_star: vec![0.0; n],
        }
    }

    /// Expansion coefficients `β = α − α*`.
    pub fn beta(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.alpha_star).map(|(a, s)| a - s).collect()
    }
}

/// Everything the solver knows at exit.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SvrModel,
    pub duals: DualSolution,
    /// `½ βᵀKβ − tᵀβ` at the returned point.
    pub objective: f64,
    pub iterations: u64,
    pub kkt_violation: f64,
}

/// Fits a ν-SVR model.
pub fn train_nu_svr(data: &TrainingSet, params: &NuSvrParams, kernel: &KernelSpec) -> Result<SvrModel, SvrError> {
    Ok(solve(data, params, kernel, None)?.model)
}

/// Like [`train_nu_svr`] but returns the solver diagnostics and the dual
/// objective after every working-set step (entry 0 is the starting point).
pub fn train_nu_svr_traced(
    data: &TrainingSet,
    params: &NuSvrParams,
    kernel: &KernelSpec,
) -> Result<(TrainOutcome, Vec<f64>), SvrError> {
    let mut trace = Vec::new();
    let outcome = solve(data, params, kernel, Some(&mut trace))?;
    Ok((outcome, trace))
}

/// Fits a ν-SVR model and keeps the solver diagnostics.
pub fn solve_nu_svr(data: &TrainingSet, params: &NuSvrParams, kernel: &KernelSpec) -> Result<TrainOutcome, SvrError> {
    solve(data, params, kernel, None)
}

/// Per-group view of the gradient.
///
/// Variables `0..n` are `α` and `n..2n` are `α*`. With `g = Kβ − t` the
/// gradient of the dual objective is `g` on the first block and `−g` on the
/// second.
struct Gaps {
    /// Largest `−G` over α not at the upper bound, and its index.
    up_p: (f64, Option<usize>),
    /// Largest `G` over α* not at the lower bound, and its index.
    up_n: (f64, Option<usize>),
    /// Largest `G` over α not at the lower bound.
    low_p: f64,
    /// Largest `−G` over α* not at the upper bound.
    low_n: f64,
}

impl Gaps {
    fn violation(&self) -> f64 {
        (self.up_p.0 + self.low_p).max(self.up_n.0 + self.low_n)
    }
}

fn scan(a: &[f64], g: &[f64], u: f64) -> Gaps {
    let n = g.len();
    let mut gaps = Gaps {
        up_p: (f64::NEG_INFINITY, None),
        up_n: (f64::NEG_INFINITY, None),
        low_p: f64::NEG_INFINITY,
        low_n: f64::NEG_INFINITY,
    };
    for k in 0..n {
        let (ap, an, gk) = (a[k], a[k + n], g[k]);
        if ap < u {
            if -gk > gaps.up_p.0 {
                gaps.up_p = (-gk, Some(k));
            }
        }
        if ap > 0.0 && gk > gaps.low_p {
            gaps.low_p = gk;
        }
        if an > 0.0 {
            if -gk > gaps.up_n.0 {
                gaps.up_n = (-gk, Some(k + n));
            }
        }
        if an < u && gk > gaps.low_n {
            gaps.low_n = gk;
        }
    }
    gaps
}

fn solve(
    data: &TrainingSet,
    params: &NuSvrParams,
    kernel: &KernelSpec,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<TrainOutcome, SvrError> {
    params.validate()?;
    kernel.validate()?;
    let n = data.len();
    let t = data.targets();
    let u = params.upper_bound(n);
    let k = KernelRows::new(*kernel, data.rows());

    // both groups start filled to Cν/2, so β = 0 and g = −t
    let mut a = vec![0.0; 2 * n];
    let mut remaining = params.c * params.nu / 2.0;
    for i in 0..n {
        let v = remaining.min(u);
        a[i] = v;
        a[i + n] = v;
        remaining -= v;
    }
    let mut g: Vec<f64> = t.iter().map(|&ti| -ti).collect();
    let grad = |g: &[f64], idx: usize| if idx < n { g[idx] } else { -g[idx - n] };

    if let Some(tr) = trace.as_deref_mut() {
        tr.push(objective_from_gradient(&a, &g, t));
    }

    let mut iterations = 0u64;
    let violation = loop {
        // first index: the maximal violator within each group
        let head = scan(&a, &g, u);
        let (gmaxp, ip) = head.up_p;
        let (gmaxn, in_) = head.up_n;
        let row_p = ip.map(|i| k.row(i));
        let row_n = in_.map(|i| k.row(i - n));

        // second index: best second-order decrease among partners
        let mut gmaxp2 = f64::NEG_INFINITY;
        let mut gmaxn2 = f64::NEG_INFINITY;
        let mut best: Option<usize> = None;
        let mut obj_min = f64::INFINITY;
        for j in 0..n {
            let gj = g[j];
            if a[j] > 0.0 {
                gmaxp2 = gmaxp2.max(gj);
                if let (Some(i), Some(row)) = (ip, row_p.as_ref()) {
                    let diff = gmaxp + gj;
                    if diff > 0.0 {
                        let quad = k.diag(i) + k.diag(j) - 2.0 * row[j];
                        let od = -diff * diff / if quad > 0.0 { quad } else { TAU };
                        if od < obj_min {
                            obj_min = od;
                            best = Some(j);
                        }
                    }
                }
            }
        }
        for j in 0..n {
            let gj = -g[j];
            if a[j + n] < u {
                gmaxn2 = gmaxn2.max(-gj);
                if let (Some(i), Some(row)) = (in_, row_n.as_ref()) {
                    let diff = gmaxn - gj;
                    if diff > 0.0 {
                        let quad = k.diag(i - n) + k.diag(j) - 2.0 * row[j];
                        let od = -diff * diff / if quad > 0.0 { quad } else { TAU };
                        if od < obj_min {
                            obj_min = od;
                            best = Some(j + n);
                        }
                    }
                }
            }
        }
        drop(row_p);
        drop(row_n);

        let gap = (gmaxp + gmaxp2).max(gmaxn + gmaxn2);
        if gap <= params.kkt_tolerance {
            break gap.max(0.0);
        }
        let Some(j) = best else {
            break gap.max(0.0);
        };
        if iterations >= params.max_iterations {
            return Err(SvrError::NotConverged {
                iterations,
                violation: gap,
            });
        }
        iterations += 1;

        let i = if j < n { ip.unwrap() } else { in_.unwrap() };
        let (ii, jj) = (i % n, j % n);
        let row_i = k.row(ii);
        let row_j = k.row(jj);
        let quad = k.diag(ii) + k.diag(jj) - 2.0 * row_i[jj];
        let quad = if quad > 0.0 { quad } else { TAU };
        let delta = (grad(&g, i) - grad(&g, j)) / quad;

        let (old_i, old_j) = (a[i], a[j]);
        let sum = old_i + old_j;
        let (mut ai, mut aj) = (old_i - delta, old_j + delta);
        if sum > u {
            if ai > u {
                ai = u;
                aj = sum - u;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if sum > u {
            if aj > u {
                aj = u;
                ai = sum - u;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
        a[i] = ai;
        a[j] = aj;

        let sign = if i < n { 1.0 } else { -1.0 };
        let (di, dj) = (sign * (ai - old_i), sign * (aj - old_j));
        for (m, gm) in g.iter_mut().enumerate() {
            *gm += row_i[m] * di + row_j[m] * dj;
        }

        if let Some(tr) = trace.as_deref_mut() {
            tr.push(objective_from_gradient(&a, &g, t));
        }
    };

    let (bias, epsilon) = bias_and_epsilon(&a, &g, u);
    let duals = DualSolution {
        alpha: a[..n].to_vec(),
        alpha_star: a[n..].to_vec(),
    };
    let objective = objective_from_gradient(&a, &g, t);
    let model = SvrModel::from_duals(data, &duals, bias, epsilon, *kernel);
    Ok(TrainOutcome {
        model,
        duals,
        objective,
        iterations,
        kkt_violation: violation,
    })
}

/// `½ βᵀKβ − tᵀβ` from `g = Kβ − t`.
fn objective_from_gradient(a: &[f64], g: &[f64], t: &[f64]) -> f64 {
    let n = g.len();
    (0..n).map(|k| (a[k] - a[k + n]) * (g[k] - t[k])).sum::<f64>() / 2.0
}

/// Recovers `b` and `ε` from the multipliers of the two group constraints.
///
/// Free variables in the α block satisfy `G = −(b + ε)` and free variables in
/// the α* block satisfy `G = b − ε`; each side is averaged over its free
/// variables, or taken as the midpoint of the feasible interval when none are
/// free.
fn bias_and_epsilon(a: &[f64], g: &[f64], u: f64) -> (f64, f64) {
    let n = g.len();
    let group = |offset: usize, sign: f64| {
        let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut sum, mut free) = (0.0, 0usize);
        for k in 0..n {
            let gk = sign * g[k];
            let v = a[k + offset];
            if v >= u {
                lb = lb.max(gk);
            } else if v <= 0.0 {
                ub = ub.min(gk);
            } else {
                sum += gk;
                free += 1;
            }
        }
        if free > 0 {
            sum / free as f64
        } else {
            (lb + ub) / 2.0
        }
    };
    let r1 = group(0, 1.0);
    let r2 = group(n, -1.0);
    ((r2 - r1) / 2.0, (-(r1 + r2) / 2.0).max(0.0))
}

/// `½ βᵀKβ − tᵀβ` for the given coefficients.
pub fn dual_objective(data: &TrainingSet, kernel: &KernelSpec, beta: &[f64]) -> Result<f64, SvrError> {
    if beta.len() != data.len() {
        return Err(SvrError::ShapeMismatch {
            expected: data.len(),
            found: beta.len(),
        });
    }
    let n = data.len();
    let k = gram_matrix(kernel, &data.rows());
    let mut quad = 0.0;
    for i in 0..n {
        let kb: f64 = (0..n).map(|j| k[i * n + j] * beta[j]).sum();
        quad += beta[i] * kb;
    }
    let lin: f64 = beta.iter().zip(data.targets()).map(|(b, t)| b * t).sum();
    Ok(0.5 * quad - lin)
}

/// Largest violation of the optimality conditions at `duals`.
///
/// Combines the maximal violating pair gap in each group with how far each
/// group sum is from `Cν/2`. Zero at an exact optimum.
pub fn kkt_violation(
    data: &TrainingSet,
    params: &NuSvrParams,
    kernel: &KernelSpec,
    duals: &DualSolution,
) -> Result<f64, SvrError> {
    params.validate()?;
    kernel.validate()?;
    let n = data.len();
    for len in [duals.alpha.len(), duals.alpha_star.len()] {
        if len != n {
            return Err(SvrError::ShapeMismatch { expected: n, found: len });
        }
    }
    let beta = duals.beta();
    let k = gram_matrix(kernel, &data.rows());
    let g: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[i * n + j] * beta[j]).sum::<f64>() - data.targets()[i])
        .collect();
    let mut a = duals.alpha.clone();
    a.extend_from_slice(&duals.alpha_star);
    let u = params.upper_bound(n);
    let pair_gap = scan(&a, &g, u).violation().max(0.0);
    let half = params.c * params.nu / 2.0;
    let sum_p: f64 = duals.alpha.iter().sum();
    let sum_n: f64 = duals.alpha_star.iter().sum();
    Ok(pair_gap.max((sum_p - half).abs()).max((sum_n - half).abs()))
}

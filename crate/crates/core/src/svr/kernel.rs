use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SvrError;

/// Above this many samples the Gram matrix is streamed row by row.
pub const FULL_CACHE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Rbf { gamma: f64 },
    Polynomial { degree: u32, gamma: f64, coef0: f64 },
    Linear,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), SvrError> {
        match *self {
            KernelSpec::Rbf { gamma } => {
                if !(gamma > 0.0) || !gamma.is_finite() {
                    return Err(SvrError::invalid("gamma", format!("{gamma} must be positive")));
                }
            }
            KernelSpec::Polynomial { degree, gamma, coef0 } => {
                if degree < 1 {
                    return Err(SvrError::invalid("degree", "must be at least 1"));
                }
                if !(gamma > 0.0) || !gamma.is_finite() {
                    return Err(SvrError::invalid("gamma", format!("{gamma} must be positive")));
                }
                if !coef0.is_finite() {
                    return Err(SvrError::invalid("coef0", "must be finite"));
                }
            }
            KernelSpec::Linear => {}
        }
        Ok(())
    }

    /// Kernel value without the dimension check.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Polynomial { degree, gamma, coef0 } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (gamma * dot + coef0).powi(degree as i32)
            }
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

/// `K(x, y)` for the given kernel.
pub fn kernel_eval(kernel: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64, SvrError> {
    if x.len() != y.len() {
        return Err(SvrError::ShapeMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(kernel.eval_unchecked(x, y))
}

/// Dense row-major Gram matrix, built in parallel.
///
/// Every entry is an independent kernel evaluation, so the result does not
/// depend on the thread count.
pub fn gram_matrix(kernel: &KernelSpec, rows: &[&[f64]]) -> Vec<f64> {
    let n = rows.len();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, out)| {
        for (j, v) in out.iter_mut().enumerate() {
            *v = kernel.eval_unchecked(rows[i], rows[j]);
        }
    });
    k
}

/// Kernel rows for the solver: cached in full for desk-sized problems,
/// recomputed on demand otherwise.
pub(crate) struct KernelRows<'a> {
    kernel: KernelSpec,
    rows: Vec<&'a [f64]>,
    full: Option<Vec<f64>>,
    diag: Vec<f64>,
}

impl<'a> KernelRows<'a> {
    pub(crate) fn new(kernel: KernelSpec, rows: Vec<&'a [f64]>) -> Self {
        let n = rows.len();
        let full = (n <= FULL_CACHE_LIMIT).then(|| gram_matrix(&kernel, &rows));
        let diag = match &full {
            Some(k) => (0..n).map(|i| k[i * n + i]).collect(),
            None => rows.iter().map(|r| kernel.eval_unchecked(r, r)).collect(),
        };
        Self { kernel, rows, full, diag }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub(crate) fn row(&self, i: usize) -> Cow<'_, [f64]> {
        let n = self.len();
        match &self.full {
            Some(k) => Cow::Borrowed(&k[i * n..(i + 1) * n]),
            None => Cow::Owned(self.rows.iter().map(|r| self.kernel.eval_unchecked(self.rows[i], r)).collect()),
        }
    }
}

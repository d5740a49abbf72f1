use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapeMode {
    /// Mean relative error times 100.
    Percent,
    /// Mean relative error.
    Fraction,
}

fn check(targets: &[f64], predictions: &[f64]) -> Result<(), EvalError> {
    if targets.len() != predictions.len() {
        return Err(EvalError::ShapeMismatch {
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(EvalError::Empty);
    }
    if targets.iter().chain(predictions).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

/// Mean squared error `(1/N) Σ (t_i − f_i)²`.
pub fn mse(targets: &[f64], predictions: &[f64]) -> Result<f64, EvalError> {
    check(targets, predictions)?;
    let sum: f64 = targets.iter().zip(predictions).map(|(t, f)| (t - f) * (t - f)).sum();
    Ok(sum / targets.len() as f64)
}

/// Mean absolute percentage error. Any zero target is an error; filter
/// those rows first if that is the intent.
pub fn mape(targets: &[f64], predictions: &[f64], mode: MapeMode) -> Result<f64, EvalError> {
    check(targets, predictions)?;
    if let Some(index) = targets.iter().position(|&t| t == 0.0) {
        return Err(EvalError::ZeroTarget { index });
    }
    let sum: f64 = targets.iter().zip(predictions).map(|(t, f)| (t - f).abs() / t.abs()).sum();
    let fraction = sum / targets.len() as f64;
    Ok(match mode {
        MapeMode::Fraction => fraction,
        MapeMode::Percent => 100.0 * fraction,
    })
}

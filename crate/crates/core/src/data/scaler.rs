use serde::{Deserialize, Serialize};

use super::DataError;

/// Per-column min-max scaling to `[0, 1]`.
///
/// A constant column maps to 0.5 and inverts back to its constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn from_bounds(min: Vec<f64>, max: Vec<f64>) -> Result<Self, DataError> {
        if min.len() != max.len() {
            return Err(DataError::ShapeMismatch {
                expected: min.len(),
                found: max.len(),
            });
        }
        for (j, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(DataError::Invalid(format!("column {j}: bounds [{lo}, {hi}]")));
            }
        }
        Ok(Self { min, max })
    }

    /// Fits column bounds over `rows`.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, DataError> {
        let first = rows.first().ok_or_else(|| DataError::Invalid("cannot fit a scaler on zero rows".into()))?;
        let dim = first.as_ref().len();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(DataError::ShapeMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::Invalid(format!("row {i}, column {j}: non-finite value {v}")));
                }
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Fits a single-column scaler.
    pub fn fit_column(values: &[f64]) -> Result<Self, DataError> {
        let rows: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
        Self::fit(&rows)
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            (v - self.min[j]) / span
        } else {
            0.5
        }
    }

    pub fn inverse_value(&self, j: usize, s: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            self.min[j] + s * span
        } else {
            self.min[j]
        }
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>, DataError> {
        self.check(row)?;
        Ok(row.iter().enumerate().map(|(j, &v)| self.transform_value(j, v)).collect())
    }

    pub fn inverse(&self, row: &[f64]) -> Result<Vec<f64>, DataError> {
        self.check(row)?;
        Ok(row.iter().enumerate().map(|(j, &s)| self.inverse_value(j, s)).collect())
    }

    fn check(&self, row: &[f64]) -> Result<(), DataError> {
        if row.len() != self.dim() {
            return Err(DataError::ShapeMismatch {
                expected: self.dim(),
                found: row.len(),
            });
        }
        Ok(())
    }
}

/// Feature and target scalers fitted on one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedScalers {
    pub features: MinMaxScaler,
    pub target: MinMaxScaler,
}

impl FittedScalers {
    pub fn scale_features(&self, x: &[f64]) -> Result<Vec<f64>, DataError> {
        self.features.transform(x)
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        self.target.transform_value(0, y)
    }

    pub fn unscale_target(&self, s: f64) -> f64 {
        self.target.inverse_value(0, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_examples() {
        let s = MinMaxScaler::fit_column(&[2.0, 4.0, 6.0]).unwrap();
        let t: Vec<f64> = [2.0, 4.0, 6.0].iter().map(|&v| s.transform_value(0, v)).collect();
        assert_eq!(t, vec![0.0, 0.5, 1.0]);

        let c = MinMaxScaler::fit_column(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(c.transform_value(0, 5.0), 0.5);
        assert_eq!(c.inverse_value(0, 0.5), 5.0);
    }

    #[test]
    fn rejects_empty_ragged_and_bad_bounds() {
        let empty: [Vec<f64>; 0] = [];
        assert!(MinMaxScaler::fit(&empty).is_err());
        assert!(MinMaxScaler::fit(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(MinMaxScaler::fit(&[vec![f64::NAN]]).is_err());
        assert!(MinMaxScaler::from_bounds(vec![1.0], vec![0.0]).is_err());
        let s = MinMaxScaler::fit(&[vec![0.0, 1.0]]).unwrap();
        assert!(s.transform(&[1.0]).is_err());
    }
}

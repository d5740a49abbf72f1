use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DualSolution, KernelSpec, SvrError, TrainingSet};
use crate::data::FittedScalers;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained regression function `f(x) = Σ β_i K(s_i, x) + b`.
///
/// Immutable once built; `predict` may be called from many threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvrModel {
    version: u32,
    kernel: KernelSpec,
    input_dim: usize,
    support_inputs: Vec<Vec<f64>>,
    dual_coefs: Vec<f64>,
    bias: f64,
    epsilon: f64,
    #[serde(default)]
    scaler: Option<FittedScalers>,
    /// Free-form provenance such as the config hash.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

impl SvrModel {
    pub fn new(
        kernel: KernelSpec,
        support_inputs: Vec<Vec<f64>>,
        dual_coefs: Vec<f64>,
        bias: f64,
        epsilon: f64,
    ) -> Result<Self, SvrError> {
        let input_dim = support_inputs.first().map_or(0, Vec::len);
        let model = Self {
            version: MODEL_FORMAT_VERSION,
            kernel,
            input_dim,
            support_inputs,
            dual_coefs,
            bias,
            epsilon,
            scaler: None,
            metadata: BTreeMap::new(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Keeps every sample whose `α` or `α*` is positive.
    pub(crate) fn from_duals(data: &TrainingSet, duals: &DualSolution, bias: f64, epsilon: f64, kernel: KernelSpec) -> Self {
        let mut support_inputs = Vec::new();
        let mut dual_coefs = Vec::new();
        for (i, (a, s)) in duals.alpha.iter().zip(&duals.alpha_star).enumerate() {
            if *a > 0.0 || *s > 0.0 {
                support_inputs.push(data.inputs()[i].clone());
                dual_coefs.push(a - s);
            }
        }
        Self {
            version: MODEL_FORMAT_VERSION,
            kernel,
            input_dim: data.dim(),
            support_inputs,
            dual_coefs,
            bias,
            epsilon,
            scaler: None,
            metadata: BTreeMap::new(),
        }
    }

    fn validate(&self) -> Result<(), SvrError> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(SvrError::Format(format!(
                "unsupported version {} (expected {MODEL_FORMAT_VERSION})",
                self.version
            )));
        }
        self.kernel.validate()?;
        if self.support_inputs.len() != self.dual_coefs.len() {
            return Err(SvrError::ShapeMismatch {
                expected: self.support_inputs.len(),
                found: self.dual_coefs.len(),
            });
        }
        for row in &self.support_inputs {
            if row.len() != self.input_dim {
                return Err(SvrError::ShapeMismatch {
                    expected: self.input_dim,
                    found: row.len(),
                });
            }
        }
        let finite = self.support_inputs.iter().flatten().chain(&self.dual_coefs).all(|v| v.is_finite());
        if !finite || !self.bias.is_finite() || !(self.epsilon >= 0.0) {
            return Err(SvrError::Format("non-finite coefficients or negative epsilon".into()));
        }
        Ok(())
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn support_inputs(&self) -> &[Vec<f64>] {
        &self.support_inputs
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn scaler(&self) -> Option<&FittedScalers> {
        self.scaler.as_ref()
    }

    pub fn with_scaler(mut self, scaler: FittedScalers) -> Self {
        self.scaler = Some(scaler);
        self
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Number of samples with a nonzero coefficient.
    pub fn n_support(&self) -> usize {
        self.dual_coefs.iter().filter(|&&b| b != 0.0).count()
    }

    /// Drops expansion terms whose coefficient is exactly zero.
    pub fn pruned(&self) -> Self {
        let (support_inputs, dual_coefs) = self
            .support_inputs
            .iter()
            .zip(&self.dual_coefs)
            .filter(|(_, &b)| b != 0.0)
            .map(|(s, &b)| (s.clone(), b))
            .unzip();
        Self {
            support_inputs,
            dual_coefs,
            ..self.clone()
        }
    }

    /// Prediction in the space the model was trained in.
    pub fn predict(&self, x: &[f64]) -> Result<f64, SvrError> {
        if x.len() != self.input_dim {
            return Err(SvrError::ShapeMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let mut acc = 0.0;
        for (s, b) in self.support_inputs.iter().zip(&self.dual_coefs) {
            if *b != 0.0 {
                acc += b * self.kernel.eval_unchecked(s, x);
            }
        }
        Ok(acc + self.bias)
    }

    pub fn predict_many<R: AsRef<[f64]> + Sync>(&self, xs: &[R]) -> Result<Vec<f64>, SvrError> {
        xs.par_iter().map(|x| self.predict(x.as_ref())).collect()
    }

    /// Scales raw features, predicts, and maps the result back to the
    /// original target units. Needs a stored scaler.
    pub fn predict_original(&self, raw: &[f64]) -> Result<f64, SvrError> {
        let scaler = self
            .scaler
            .as_ref()
            .ok_or_else(|| SvrError::Format("model carries no scaler".into()))?;
        let x = scaler
            .scale_features(raw)
            .map_err(|e| SvrError::Format(e.to_string()))?;
        Ok(scaler.unscale_target(self.predict(&x)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SvrError> {
        let model: Self = serde_json::from_str(text).map_err(|e| SvrError::Format(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), SvrError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| SvrError::Format(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, SvrError> {
        let text = std::fs::read_to_string(path).map_err(|e| SvrError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_predictions() {
        let rbf = KernelSpec::Rbf { gamma: 10.0 };
        let zero = SvrModel::new(rbf, vec![vec![0.1, 0.2]], vec![0.0], 0.7, 0.0).unwrap();
        assert_eq!(zero.predict(&[0.9, 0.3]).unwrap(), 0.7);
        let one = SvrModel::new(rbf, vec![vec![0.1, 0.2]], vec![1.0], 0.0, 0.0).unwrap();
        assert_eq!(one.predict(&[0.1, 0.2]).unwrap(), 1.0);
        assert!(matches!(one.predict(&[0.1]), Err(SvrError::ShapeMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let model = SvrModel::new(
            KernelSpec::Polynomial { degree: 3, gamma: 0.1, coef0: -1.0 / 3.0 },
            vec![vec![0.1, 1.0 / 7.0], vec![std::f64::consts::PI, 1e-300]],
            vec![2.0f64.sqrt(), -2.0f64.sqrt()],
            -0.123_456_789_012_345_67,
            5e-324,
        )
        .unwrap();
        let back = SvrModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.dual_coefs().iter().zip(model.dual_coefs()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(SvrModel::from_json("{}").is_err());
        let model = SvrModel::new(KernelSpec::Linear, vec![vec![1.0]], vec![0.5], 0.0, 0.0).unwrap();
        let text = model.to_json().replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(SvrModel::from_json(&text), Err(SvrError::Format(_))));
    }
}

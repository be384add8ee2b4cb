//! RBF-kernel support vector classifier: inference, model files, and a
//! small SMO trainer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FILE_VERSION: u32 = 1;

/// `score(x) = sum_i coef_i * exp(-gamma |sv_i - x|^2) + bias`; stressed iff `score > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub version: u32,
    pub gamma: f64,
    pub bias: f64,
    pub n_features: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed dual coefficients `alpha_i * y_i`.
    pub dual_coefficients: Vec<f64>,
}

impl SvmModel {
    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_FILE_VERSION {
            return Err(Error::Spec(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) || !self.bias.is_finite() {
            return Err(Error::Spec(
                "gamma must be > 0 and parameters finite".into(),
            ));
        }
        if self.support_vectors.is_empty()
            || self.support_vectors.len() != self.dual_coefficients.len()
        {
            return Err(Error::Spec(
                "support vectors and coefficients must be non-empty and of equal length".into(),
            ));
        }
        if self
            .support_vectors
            .iter()
            .any(|sv| sv.len() != self.n_features)
        {
            return Err(Error::Spec(format!(
                "every support vector must have {} features",
                self.n_features
            )));
        }
        let finite = self.dual_coefficients.iter().all(|c| c.is_finite())
            && self.support_vectors.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Spec("non-finite model parameter".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: SvmModel =
            serde_json::from_str(text).map_err(|e| Error::Decode(format!("model file: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite feature".into()));
        }
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, c)| c * rbf(self.gamma, sv, x))
            .sum();
        Ok(sum + self.bias)
    }

    /// `(score, stressed)`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, bool)> {
        let s = self.decision(x)?;
        Ok((s, s > 0.0))
    }
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub gamma: f64,
    pub c: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            gamma: 0.01,
            c: 10.0,
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

/// Soft-margin SVM by sequential minimal optimization with second-order
/// working set selection. Label `true` is the positive class.
pub fn svm_train(data: &[(Vec<f64>, bool)], params: &TrainParams) -> Result<SvmModel> {
    if data.len() < 2 {
        return Err(Error::Input("need at least two training examples".into()));
    }
    if data.iter().all(|d| d.1) || data.iter().all(|d| !d.1) {
        return Err(Error::Input(
            "training data must contain both classes".into(),
        ));
    }
    if !(params.gamma > 0.0) || !(params.c > 0.0) {
        return Err(Error::Input("gamma and C must be > 0".into()));
    }
    let dim = data[0].0.len();
    if dim == 0
        || data
            .iter()
            .any(|d| d.0.len() != dim || d.0.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Input(
            "training vectors must be finite with equal dimension".into(),
        ));
    }

    let n = data.len();
    let c = params.c;
    let y: Vec<f64> = data.iter().map(|d| if d.1 { 1.0 } else { -1.0 }).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = y[i] * y[j] * rbf(params.gamma, &data[i].0, &data[j].0);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let qd: Vec<f64> = (0..n).map(|i| q[i * n + i]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    const TAU: f64 = 1e-12;

    let mut iter = 0;
    while iter < params.max_iter {
        iter += 1;
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };
        // j: second-order choice in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let quad = qd[i] + qd[t] - 2.0 * y[i] * y[t] * q[i * n + t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < params.tol {
            break;
        }
        let Some(j) = j_sel else { break };

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q[i * n + j];
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            grad[k] += q[i * n + k] * di + q[j * n + k] * dj;
        }
    }
    if iter >= params.max_iter {
        log::warn!("SMO stopped at the iteration cap ({})", params.max_iter);
    }

    // rho from free variables, or the midpoint of the feasible interval
    let (mut ub, mut lb, mut sum_free, mut n_free) =
        (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum_free += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    };

    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(data[t].0.clone());
            dual_coefficients.push(alpha[t] * y[t]);
        }
    }
    let model = SvmModel {
        version: MODEL_FILE_VERSION,
        gamma: params.gamma,
        bias: -rho,
        n_features: dim,
        support_vectors,
        dual_coefficients,
    };
    model.validate()?;
    Ok(model)
}

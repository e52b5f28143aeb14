//! Soft-margin kernel SVM trained with sequential minimal optimization.
//!
//! The classifier kernel is a function of the geometry's inner product or
//! squared distance, so an RBF classifier can run on top of a corrected
//! RKHS metric: `κ_svm(w, z) = exp(-γ ‖w - z‖²)` with the distance measured
//! after neutralization.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{Geometry, Prepared};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierKernel {
    Linear,
    Rbf { gamma: f64 },
}

impl ClassifierKernel {
    fn eval(&self, geom: &Geometry<'_>, a: &Prepared<'_>, b: &Prepared<'_>) -> Result<f64> {
        match self {
            ClassifierKernel::Linear => geom.inner(a, b),
            ClassifierKernel::Rbf { gamma } => Ok((-gamma * geom.squared_distance(a, b)?).exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c_reg: f64,
    pub kernel: ClassifierKernel,
    /// Training stops once the maximal KKT violation gap is at most `tol`.
    pub tol: f64,
    /// Cap on pair updates.
    pub max_iter: usize,
}

impl SvmParams {
    /// Defaults: `C = 1`, RBF with `γ = 1/d`, `tol = 1e-3`.
    pub fn with_dim(dim: usize) -> Self {
        SvmParams {
            c_reg: 1.0,
            kernel: ClassifierKernel::Rbf {
                gamma: 1.0 / dim.max(1) as f64,
            },
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Support vectors (rows) in input space.
    pub support_vectors: Array2<f64>,
    /// `α_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    /// Raw multipliers, one per training point, in `[0, C]`.
    pub alphas: Vec<f64>,
    pub labels: Vec<i8>,
    pub bias: f64,
    pub params: SvmParams,
    /// Largest KKT violation among training points at exit.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Violation of `y f(x) >= 1`, `= 1` or `<= 1` for a point at the lower bound,
/// strictly inside, or at the upper bound.
fn kkt_violation(y: f64, alpha: f64, err: f64, c: f64) -> f64 {
    let r = y * err;
    if alpha <= 0.0 {
        (-r).max(0.0)
    } else if alpha >= c {
        r.max(0.0)
    } else {
        r.abs()
    }
}

/// Train on rows of `x` with labels in `{-1, +1}`.
///
/// Pairs are chosen by the second-order maximal-violating-pair rule on the
/// dual gradient; ties go to the lowest index.
pub fn svm_train(geom: &Geometry<'_>, x: ArrayView2<'_, f64>, labels: &[i8], params: SvmParams) -> Result<SvmModel> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if labels.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::InvalidArgument("labels must be -1 or +1".into()));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::InsufficientData("SVM training needs both classes".into()));
    }
    if params.c_reg.is_nan() || params.c_reg <= 0.0 || params.tol.is_nan() || params.tol <= 0.0 {
        return Err(Error::InvalidArgument("C and tol must be positive".into()));
    }
    if let ClassifierKernel::Rbf { gamma } = params.kernel {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::InvalidArgument("classifier gamma must be positive".into()));
        }
    }

    let prepared = x
        .rows()
        .into_iter()
        .map(|r| geom.prepare(r))
        .collect::<Result<Vec<_>>>()?;
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = params.kernel.eval(geom, &prepared[i], &prepared[j])?;
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }

    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let c = params.c_reg;
    let mut alpha = vec![0.0; n];
    // Gradient of ½αᵀQα - Σα with Q_ij = y_i y_j K_ij.
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        let mut i = None;
        let mut m_up = f64::NEG_INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m_up {
                m_up = v;
                i = Some(t);
            }
        }
        let mut j = None;
        let mut m_low = f64::INFINITY;
        let mut best = f64::INFINITY;
        if let Some(i) = i {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                m_low = m_low.min(v);
                let b = m_up - v;
                if b > 0.0 {
                    let a = (k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]]).max(1e-12);
                    let score = -b * b / a;
                    if score < best {
                        best = score;
                        j = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i, j) else { break };
        if m_up - m_low <= params.tol {
            break;
        }
        if iterations >= params.max_iter {
            warn!("SVM stopped after {iterations} updates with KKT gap {}", m_up - m_low);
            break;
        }
        iterations += 1;

        // Move α_i by y_i t and α_j by -y_j t, t >= 0, staying in the box.
        let a = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(1e-12);
        let mut t = (-y[i] * grad[i] + y[j] * grad[j]) / a;
        let hi_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let hi_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        t = t.min(hi_i).min(hi_j).max(0.0);
        let di = y[i] * t;
        let dj = -y[j] * t;
        alpha[i] = (alpha[i] + di).clamp(0.0, c);
        alpha[j] = (alpha[j] + dj).clamp(0.0, c);
        for s in 0..n {
            grad[s] += y[s] * (y[i] * k[[s, i]] * di + y[j] * k[[s, j]] * dj);
        }
    }

    // b from free multipliers, else the midpoint of the feasible interval.
    let free: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0 && alpha[t] < c).collect();
    let b = if free.is_empty() {
        let ub = (0..n)
            .filter(|&t| in_up(alpha[t], y[t]))
            .map(|t| -y[t] * grad[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let lb = (0..n)
            .filter(|&t| in_low(alpha[t], y[t]))
            .map(|t| -y[t] * grad[t])
            .fold(f64::INFINITY, f64::min);
        match (ub.is_finite(), lb.is_finite()) {
            (true, true) => 0.5 * (ub + lb),
            (true, false) => ub,
            (false, true) => lb,
            (false, false) => 0.0,
        }
    } else {
        free.iter().map(|&t| -y[t] * grad[t]).sum::<f64>() / free.len() as f64
    };

    // y_t E_t = y_t f(x_t) - 1 = G_t + y_t b
    let kkt_residual = (0..n)
        .map(|t| kkt_violation(y[t], alpha[t], y[t] * (grad[t] + y[t] * b), c))
        .fold(0.0, f64::max);
    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let mut sv = Array2::zeros((support.len(), x.ncols()));
    for (r, &t) in support.iter().enumerate() {
        sv.row_mut(r).assign(&x.row(t));
    }
    Ok(SvmModel {
        support_vectors: sv,
        dual_coef: support.iter().map(|&t| alpha[t] * y[t]).collect(),
        alphas: alpha,
        labels: labels.to_vec(),
        bias: b,
        params,
        kkt_residual,
        iterations,
    })
}

impl SvmModel {
    /// `f(w) = Σ α_i y_i κ(x_i, w) + b`.
    pub fn decision_value(&self, geom: &Geometry<'_>, w: ArrayView1<'_, f64>) -> Result<f64> {
        let pw = geom.prepare(w)?;
        let mut f = self.bias;
        for (sv, coef) in self.support_vectors.rows().into_iter().zip(&self.dual_coef) {
            let ps = geom.prepare(sv)?;
            f += coef * self.params.kernel.eval(geom, &ps, &pw)?;
        }
        Ok(f)
    }

    pub fn decision_values(&self, geom: &Geometry<'_>, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let sv: Vec<Prepared<'_>> = self
            .support_vectors
            .rows()
            .into_iter()
            .map(|r| geom.prepare(r))
            .collect::<Result<_>>()?;
        let mut out = Array1::zeros(x.nrows());
        for (t, row) in x.rows().into_iter().enumerate() {
            let pw = geom.prepare(row)?;
            let mut f = self.bias;
            for (ps, coef) in sv.iter().zip(&self.dual_coef) {
                f += coef * self.params.kernel.eval(geom, ps, &pw)?;
            }
            out[t] = f;
        }
        Ok(out)
    }
}

/// Predicted label, `+1` when the decision value is nonnegative.
pub fn svm_predict(model: &SvmModel, geom: &Geometry<'_>, w: ArrayView1<'_, f64>) -> Result<i8> {
    Ok(if model.decision_value(geom, w)? >= 0.0 { 1 } else { -1 })
}

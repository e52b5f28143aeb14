//! Kernel functions described declaratively by [`KernelSpec`].
//!
//! | family | value |
//! |---|---|
//! | linear | `xᵀy` |
//! | cosine | `xᵀy / (‖x‖‖y‖)` |
//! | rbf | `exp(-γ‖x-y‖²)` |
//! | sigmoid | `tanh(γxᵀy + c₀)` |
//! | polynomial | `(γxᵀy + c₀)^deg` |
//! | laplace | `exp(-γ‖x-y‖₁)` |
//! | convex_combination | `Σ αℓ κℓ(x, y)` |
//!
//! The sigmoid kernel is not positive semi-definite in general. It is
//! accepted anyway; consumers that need a valid feature space (kernel PCA)
//! discard the negative part of its spectrum.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_COEF0: f64 = 1.0;
pub const DEFAULT_DEGREE: u32 = 2;

/// Declarative kernel description, serialized as e.g.
/// `{"family":"rbf","gamma":0.01}`.
///
/// A missing `gamma` means "1/d", filled in by [`KernelSpec::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Linear,
    Cosine,
    Rbf {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Sigmoid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default = "default_coef0")]
        coef0: f64,
    },
    Polynomial {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default = "default_coef0")]
        coef0: f64,
        #[serde(default = "default_degree")]
        degree: u32,
    },
    Laplace {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    ConvexCombination {
        components: Vec<WeightedKernel>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedKernel {
    pub weight: f64,
    pub spec: KernelSpec,
}

fn default_coef0() -> f64 {
    DEFAULT_COEF0
}

fn default_degree() -> u32 {
    DEFAULT_DEGREE
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        KernelSpec::Rbf { gamma: Some(gamma) }
    }

    pub fn laplace(gamma: f64) -> Self {
        KernelSpec::Laplace { gamma: Some(gamma) }
    }

    pub fn sigmoid(gamma: f64, coef0: f64) -> Self {
        KernelSpec::Sigmoid {
            gamma: Some(gamma),
            coef0,
        }
    }

    pub fn polynomial(gamma: f64, coef0: f64, degree: u32) -> Self {
        KernelSpec::Polynomial {
            gamma: Some(gamma),
            coef0,
            degree,
        }
    }

    pub fn convex(components: Vec<(f64, KernelSpec)>) -> Self {
        KernelSpec::ConvexCombination {
            components: components
                .into_iter()
                .map(|(weight, spec)| WeightedKernel { weight, spec })
                .collect(),
        }
    }

    /// Family name as used in JSON and on the command line.
    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Cosine => "cosine",
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Sigmoid { .. } => "sigmoid",
            KernelSpec::Polynomial { .. } => "polynomial",
            KernelSpec::Laplace { .. } => "laplace",
            KernelSpec::ConvexCombination { .. } => "convex_combination",
        }
    }

    /// Default-parameter spec for a family name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "linear" => KernelSpec::Linear,
            "cosine" => KernelSpec::Cosine,
            "rbf" => KernelSpec::Rbf { gamma: None },
            "sigmoid" => KernelSpec::Sigmoid {
                gamma: None,
                coef0: DEFAULT_COEF0,
            },
            "polynomial" | "poly" => KernelSpec::Polynomial {
                gamma: None,
                coef0: DEFAULT_COEF0,
                degree: DEFAULT_DEGREE,
            },
            "laplace" | "laplacian" => KernelSpec::Laplace { gamma: None },
            other => return Err(Error::InvalidKernel(format!("unknown kernel family '{other}'"))),
        })
    }

    /// Fill unset `gamma`s with `1/dim` and validate every hyperparameter.
    pub fn resolve(&self, dim: usize) -> Result<Self> {
        let fill = |g: Option<f64>| -> Result<Option<f64>> {
            let g = match g {
                Some(g) => g,
                None if dim > 0 => 1.0 / dim as f64,
                None => {
                    return Err(Error::InvalidKernel(
                        "cannot default gamma for zero-dimensional input".into(),
                    ))
                }
            };
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidKernel(format!("gamma must be > 0, got {g}")));
            }
            Ok(Some(g))
        };
        let check_coef = |c: f64| -> Result<f64> {
            if c.is_finite() {
                Ok(c)
            } else {
                Err(Error::InvalidKernel("coef0 must be finite".into()))
            }
        };
        Ok(match self {
            KernelSpec::Linear => KernelSpec::Linear,
            KernelSpec::Cosine => KernelSpec::Cosine,
            KernelSpec::Rbf { gamma } => KernelSpec::Rbf { gamma: fill(*gamma)? },
            KernelSpec::Laplace { gamma } => KernelSpec::Laplace { gamma: fill(*gamma)? },
            KernelSpec::Sigmoid { gamma, coef0 } => KernelSpec::Sigmoid {
                gamma: fill(*gamma)?,
                coef0: check_coef(*coef0)?,
            },
            KernelSpec::Polynomial { gamma, coef0, degree } => {
                if *degree < 1 {
                    return Err(Error::InvalidKernel("degree must be >= 1".into()));
                }
                KernelSpec::Polynomial {
                    gamma: fill(*gamma)?,
                    coef0: check_coef(*coef0)?,
                    degree: *degree,
                }
            }
            KernelSpec::ConvexCombination { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidKernel(
                        "convex combination needs at least one component".into(),
                    ));
                }
                let mut total = 0.0;
                let mut resolved = Vec::with_capacity(components.len());
                for c in components {
                    if !(c.weight >= 0.0 && c.weight.is_finite()) {
                        return Err(Error::InvalidKernel(format!(
                            "convex weights must be nonnegative, got {}",
                            c.weight
                        )));
                    }
                    total += c.weight;
                    resolved.push(WeightedKernel {
                        weight: c.weight,
                        spec: c.spec.resolve(dim)?,
                    });
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidKernel(format!(
                        "convex weights must sum to 1, got {total}"
                    )));
                }
                KernelSpec::ConvexCombination { components: resolved }
            }
        })
    }

    /// True when the spec (and every component) has all parameters set.
    pub fn is_resolved(&self) -> bool {
        match self {
            KernelSpec::Linear | KernelSpec::Cosine => true,
            KernelSpec::Rbf { gamma }
            | KernelSpec::Laplace { gamma }
            | KernelSpec::Sigmoid { gamma, .. }
            | KernelSpec::Polynomial { gamma, .. } => gamma.is_some(),
            KernelSpec::ConvexCombination { components } => components.iter().all(|c| c.spec.is_resolved()),
        }
    }

    /// Whether the family is guaranteed to yield PSD Gram matrices.
    pub fn is_positive_semidefinite(&self) -> bool {
        match self {
            KernelSpec::Sigmoid { .. } => false,
            KernelSpec::Polynomial { coef0, .. } => *coef0 >= 0.0,
            KernelSpec::ConvexCombination { components } => {
                components.iter().all(|c| c.spec.is_positive_semidefinite())
            }
            _ => true,
        }
    }
}

fn gamma_of(g: &Option<f64>) -> Result<f64> {
    g.ok_or_else(|| Error::InvalidKernel("gamma is unset; resolve the spec first".into()))
}

/// Evaluate `κ(x, y)`.
pub fn eval_kernel(spec: &KernelSpec, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(match spec {
        KernelSpec::Linear => x.dot(&y),
        KernelSpec::Cosine => {
            let nx = x.dot(&x).sqrt();
            let ny = y.dot(&y).sqrt();
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::ZeroVector("cosine kernel argument".into()));
            }
            (x.dot(&y) / (nx * ny)).clamp(-1.0, 1.0)
        }
        KernelSpec::Rbf { gamma } => {
            let g = gamma_of(gamma)?;
            let sq: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            (-g * sq).exp()
        }
        KernelSpec::Laplace { gamma } => {
            let g = gamma_of(gamma)?;
            let l1: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum();
            (-g * l1).exp()
        }
        KernelSpec::Sigmoid { gamma, coef0 } => (gamma_of(gamma)? * x.dot(&y) + coef0).tanh(),
        KernelSpec::Polynomial { gamma, coef0, degree } => (gamma_of(gamma)? * x.dot(&y) + coef0).powi(*degree as i32),
        KernelSpec::ConvexCombination { components } => {
            let mut acc = 0.0;
            for c in components {
                acc += c.weight * eval_kernel(&c.spec, x, y)?;
            }
            acc
        }
    })
}

/// Gram matrix `G[i, j] = κ(X_i, Y_j)`.
pub fn gram_matrix(spec: &KernelSpec, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    let mut g = Array2::zeros((x.nrows(), y.nrows()));
    for (i, xi) in x.rows().into_iter().enumerate() {
        for (j, yj) in y.rows().into_iter().enumerate() {
            g[[i, j]] = eval_kernel(spec, xi, yj)?;
        }
    }
    Ok(g)
}

/// Symmetric Gram matrix of `X` with itself; only the upper triangle is
/// evaluated, so the result is exactly symmetric.
pub fn gram_matrix_sym(spec: &KernelSpec, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = eval_kernel(spec, x.row(i), x.row(j))?;
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    Ok(g)
}

//! Pre-images of feature-space neutralized words.
//!
//! The pre-image map is assumed to decompose additively over the bias
//! subspace and its complement, `Γ(Φ(w)) = Γ⊤(P_KΦ(w)) + Γ⊥(P_K⊥Φ(w))`.
//! Since `Γ(Φ(w)) = w`, the neutralized pre-image is `w - Γ⊤(P_KΦ(w))`.
//!
//! `Γ` is learned by ridge regression from feature-space coordinates to
//! input vectors over a sample of words. The coordinates are the bias
//! coordinates `β(w)` together with kernel-PCA coordinates of the
//! neutralized images `Φ_ntr(w)` (computed with the corrected inner
//! product). The block of regression weights attached to `β` is `Γ⊤`.
//! With a linear kernel the input vector is exactly linear in both blocks,
//! so the learned `Γ⊤` reproduces `Σ β_k v_k`.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kernel_debias::KernelBiasModel;
use crate::numerics::{cholesky_solve, symmetric_eig};

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-6;

/// Learned `Γ⊤`: a `d x K` linear map from bias coordinates to input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageMap {
    pub ridge_weights: Array2<f64>,
    pub ridge_lambda: f64,
    pub training_words: Vec<String>,
    /// Number of complement coordinates used while fitting.
    pub complement_components: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreimageOptions {
    pub lambda: f64,
    /// Upper bound on complement coordinates; `None` means the input dimension.
    pub max_complement_components: Option<usize>,
}

impl Default for PreimageOptions {
    fn default() -> Self {
        PreimageOptions {
            lambda: DEFAULT_RIDGE_LAMBDA,
            max_complement_components: None,
        }
    }
}

/// Fit `Γ⊤` on the sample rows `sample` of `table`.
pub fn fit_preimage_map(
    model: &KernelBiasModel,
    table: &EmbeddingTable,
    sample: &[usize],
    options: PreimageOptions,
) -> Result<PreimageMap> {
    let k = model.k();
    if sample.len() < k + 1 {
        return Err(Error::InsufficientData(format!(
            "pre-image sample needs at least {} words, got {}",
            k + 1,
            sample.len()
        )));
    }
    if !(options.lambda >= 0.0 && options.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge lambda must be >= 0, got {}",
            options.lambda
        )));
    }
    if table.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: table.dim(),
        });
    }
    let n = sample.len();
    let x = table.matrix().select(Axis(0), sample);
    let beta = model.beta_matrix(x.view())?;

    // Corrected Gram of the sample, double-centered.
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = crate::kernels::eval_kernel(&model.spec, x.row(i), x.row(j))? - beta.row(i).dot(&beta.row(j));
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    let row_means = g.mean_axis(Axis(1)).expect("n > 0");
    let total_mean = row_means.mean().expect("n > 0");
    for i in 0..n {
        for j in 0..n {
            g[[i, j]] += total_mean - row_means[i] - row_means[j];
        }
    }
    let g = (&g + &g.t()) * 0.5;
    let eig = symmetric_eig(&g)?;
    let cap = options.max_complement_components.unwrap_or(table.dim()).min(n - 1);
    let top = eig.eigenvalues[0].max(0.0);
    let m = eig
        .eigenvalues
        .iter()
        .take(cap)
        .take_while(|&&l| top > 0.0 && l > 1e-10 * top)
        .count();
    // Coordinates of centered sample points along unit principal axes.
    let mut comp = Array2::zeros((n, m));
    for c in 0..m {
        let root = eig.eigenvalues[c].sqrt();
        comp.column_mut(c).assign(&(&eig.eigenvectors.column(c) * root));
    }

    let p = k + m;
    let mut features = Array2::zeros((n, p));
    features.slice_mut(s![.., ..k]).assign(&beta);
    features.slice_mut(s![.., k..]).assign(&comp);
    let feat_mean = features.mean_axis(Axis(0)).expect("n > 0");
    let features = &features - &feat_mean;
    let target_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let targets = &x - &target_mean;

    let mut normal = features.t().dot(&features);
    for i in 0..p {
        normal[[i, i]] += options.lambda;
    }
    let rhs = features.t().dot(&targets);
    let coef = cholesky_solve(&normal, &rhs).map_err(|e| {
        if options.lambda == 0.0 {
            Error::Numerical(format!(
                "ridge normal equations are singular ({e}); use a positive lambda"
            ))
        } else {
            e
        }
    })?;
    let ridge_weights = coef.slice(s![..k, ..]).t().to_owned();
    if ridge_weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pre-image ridge weights".into()));
    }
    Ok(PreimageMap {
        ridge_weights,
        ridge_lambda: options.lambda,
        training_words: sample.iter().map(|&i| table.word(i).to_string()).collect(),
        complement_components: m,
    })
}

impl PreimageMap {
    /// `Γ⊤(β)`: the bias-attributable part of a word with coordinates `β`.
    pub fn predict_bias(&self, beta: ArrayView1<'_, f64>) -> Array1<f64> {
        self.ridge_weights.dot(&beta)
    }
}

/// `w - Γ⊤(P_KΦ(w))`.
pub fn preimage_neutralize(map: &PreimageMap, model: &KernelBiasModel, w: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let beta = model.beta_projection(w)?;
    Ok(&w - &map.predict_bias(beta.view()))
}

/// Apply [`preimage_neutralize`] to every row of a table.
pub fn preimage_neutralize_table(
    map: &PreimageMap,
    model: &KernelBiasModel,
    table: &EmbeddingTable,
) -> Result<EmbeddingTable> {
    let beta = model.beta_matrix(table.matrix().view())?;
    let bias = beta.dot(&map.ridge_weights.t());
    table.with_matrix(table.matrix() - &bias)
}

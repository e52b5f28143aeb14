//! Kernel-PCA bias subspace in a reproducing kernel Hilbert space, and the
//! corrected (neutralized / equalized) inner products it induces.
//!
//! The feature-space design matrix has one row per defining-set word: the
//! feature image minus the pair mean. For pairs this is half the difference
//! of the two images, so every Gram entry can be written with kernel
//! evaluations on the pair members. Rows are ordered `a_1, b_1, a_2, b_2, ...`
//! and row `i` is paired with its swapped partner, giving the centered Gram
//!
//! ```text
//! K̃ = K¹¹ - K¹² - (K¹²)ᵀ + K²²,   Kˣʸ_ij = s · κ(Wˣ_i, Wʸ_j)
//! ```
//!
//! with `s = ½` by default. `K̃` is the exact Gram matrix of the feature
//! vectors `ψ_i = √s · (Φ(u_i) - Φ(u'_i))`, so an eigenvector `α` rescaled to
//! `αᵀK̃α = 1` defines a unit-norm eigenfunction `V = Σ α_i ψ_i`, and
//!
//! ```text
//! β_k(w) = ⟨V_k, Φ(w)⟩ = √s · Σ_i α^k_i (κ(u_i, w) - κ(u'_i, w)).
//! ```
//!
//! Because `s` appears in both the Gram and `β`, the projection does not
//! depend on the choice of `s`.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, KernelSpec};
use crate::linear_debias::{DefiningSets, RANK_EPS};
use crate::numerics::symmetric_eig;

/// Scale of the checkerboard blocks of the centered Gram matrix.
pub const DEFAULT_GRAM_SCALE: f64 = 0.5;

/// Defining pairs as two aligned `N x d` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    pub first: Array2<f64>,
    pub second: Array2<f64>,
}

impl PairMatrix {
    pub fn new(first: Array2<f64>, second: Array2<f64>) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.nrows(),
                got: second.nrows(),
            });
        }
        Ok(PairMatrix { first, second })
    }

    pub fn from_sets(table: &EmbeddingTable, sets: &DefiningSets) -> Self {
        let a: Vec<usize> = sets.pairs().iter().map(|p| p.0).collect();
        let b: Vec<usize> = sets.pairs().iter().map(|p| p.1).collect();
        PairMatrix {
            first: table.matrix().select(Axis(0), &a),
            second: table.matrix().select(Axis(0), &b),
        }
    }

    pub fn from_pairs(pairs: &[(Array1<f64>, Array1<f64>)]) -> Result<Self> {
        let d = pairs.first().map_or(0, |p| p.0.len());
        let mut first = Array2::zeros((pairs.len(), d));
        let mut second = Array2::zeros((pairs.len(), d));
        for (n, (a, b)) in pairs.iter().enumerate() {
            if a.len() != d || b.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.len().max(b.len()),
                });
            }
            first.row_mut(n).assign(a);
            second.row_mut(n).assign(b);
        }
        Ok(PairMatrix { first, second })
    }

    pub fn n_pairs(&self) -> usize {
        self.first.nrows()
    }

    pub fn dim(&self) -> usize {
        self.first.ncols()
    }

    /// Word of design row `i` (`W¹`) and its swapped partner (`W²`).
    fn row_words(&self, i: usize) -> (ArrayView1<'_, f64>, ArrayView1<'_, f64>) {
        let n = i / 2;
        if i.is_multiple_of(2) {
            (self.first.row(n), self.second.row(n))
        } else {
            (self.second.row(n), self.first.row(n))
        }
    }
}

/// Pairwise-centered Gram matrix `K̃` (`2N x 2N`) with block scale `scale`.
pub fn build_centered_gram(spec: &KernelSpec, pairs: &PairMatrix, scale: f64) -> Result<Array2<f64>> {
    if pairs.n_pairs() == 0 {
        return Err(Error::InsufficientData("no defining pairs".into()));
    }
    let m = 2 * pairs.n_pairs();
    let mut g = Array2::zeros((m, m));
    for i in 0..m {
        let (u_i, v_i) = pairs.row_words(i);
        for j in i..m {
            let (u_j, v_j) = pairs.row_words(j);
            let k11 = eval_kernel(spec, u_i, u_j)?;
            let k12 = eval_kernel(spec, u_i, v_j)?;
            let k12t = eval_kernel(spec, u_j, v_i)?;
            let k22 = eval_kernel(spec, v_i, v_j)?;
            let val = scale * (k11 - k12 - k12t + k22);
            g[[i, j]] = val;
            g[[j, i]] = val;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFitOptions {
    /// Block scale `s` of the centered Gram matrix.
    pub gram_scale: f64,
}

impl Default for KernelFitOptions {
    fn default() -> Self {
        KernelFitOptions {
            gram_scale: DEFAULT_GRAM_SCALE,
        }
    }
}

/// Fitted kernel-PCA bias model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBiasModel {
    /// Fully resolved kernel.
    pub spec: KernelSpec,
    pub pairs: PairMatrix,
    /// `K x 2N` dual coefficients, normalized so `αᵀK̃α = 1`.
    pub alphas: Array2<f64>,
    /// Covariance-operator eigenvalues `λ_k = μ_k / 2N`, where `μ_k` are the
    /// eigenvalues of `K̃`.
    pub eigenvalues: Vec<f64>,
    pub gram_scale: f64,
    /// `⟨V_j, V_k⟩ = α^jᵀ K̃ α^k`; the identity up to roundoff.
    pub basis_gram: Array2<f64>,
    /// Negative eigenvalues of `K̃` that were discarded (indefinite kernels).
    #[serde(default)]
    pub discarded_negative: usize,
}

/// Fit a kernel bias model on the defining sets of `table`.
pub fn fit_kernel_model(
    spec: &KernelSpec,
    sets: &DefiningSets,
    table: &EmbeddingTable,
    k: usize,
) -> Result<KernelBiasModel> {
    let spec = spec.resolve(table.dim())?;
    let pairs = PairMatrix::from_sets(table, sets);
    fit_kernel_model_on_pairs(&spec, pairs, k, KernelFitOptions::default())
}

/// Fit on explicit vector pairs. `spec` must already be resolved.
pub fn fit_kernel_model_on_pairs(
    spec: &KernelSpec,
    pairs: PairMatrix,
    k: usize,
    options: KernelFitOptions,
) -> Result<KernelBiasModel> {
    if k < 1 {
        return Err(Error::InvalidArgument("number of components must be >= 1".into()));
    }
    if !spec.is_resolved() {
        return Err(Error::InvalidKernel("kernel spec has unset parameters".into()));
    }
    if !(options.gram_scale > 0.0 && options.gram_scale.is_finite()) {
        return Err(Error::InvalidArgument("gram scale must be > 0".into()));
    }
    let gram = build_centered_gram(spec, &pairs, options.gram_scale)?;
    let m = gram.nrows();
    let eig = symmetric_eig(&gram)?;

    let top = eig.eigenvalues[0];
    let negative = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l < -RANK_EPS * top.abs().max(f64::MIN_POSITIVE))
        .count();
    if negative > 0 {
        warn!(
            "discarding {negative} negative eigenvalue(s) of the centered Gram matrix ({} kernel is indefinite)",
            spec.family()
        );
    }
    let rank = if top > 0.0 {
        eig.eigenvalues.iter().filter(|&&l| l > RANK_EPS * top).count()
    } else {
        0
    };
    if k > rank {
        return Err(Error::RankDeficient {
            requested: k,
            available: rank,
        });
    }

    let mut alphas = Array2::zeros((k, m));
    let mut eigenvalues = Vec::with_capacity(k);
    for c in 0..k {
        let mu = eig.eigenvalues[c];
        let col = eig.eigenvectors.column(c);
        alphas.row_mut(c).assign(&(&col / mu.sqrt()));
        eigenvalues.push(mu / m as f64);
    }
    let basis_gram = alphas.dot(&gram).dot(&alphas.t());

    Ok(KernelBiasModel {
        spec: spec.clone(),
        pairs,
        alphas,
        eigenvalues,
        gram_scale: options.gram_scale,
        basis_gram,
        discarded_negative: negative,
    })
}

impl KernelBiasModel {
    pub fn k(&self) -> usize {
        self.alphas.nrows()
    }

    pub fn dim(&self) -> usize {
        self.pairs.dim()
    }

    fn check_dim(&self, w: ArrayView1<'_, f64>) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// Per-pair weights `√s (α^k_{2n} - α^k_{2n+1})`, `K x N`.
    fn pair_weights(&self) -> Array2<f64> {
        let n = self.pairs.n_pairs();
        let root = self.gram_scale.sqrt();
        Array2::from_shape_fn((self.k(), n), |(k, p)| {
            root * (self.alphas[[k, 2 * p]] - self.alphas[[k, 2 * p + 1]])
        })
    }

    /// `κ(a_n, w) - κ(b_n, w)` for every pair.
    fn pair_differences(&self, w: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let n = self.pairs.n_pairs();
        let mut out = Array1::zeros(n);
        for p in 0..n {
            out[p] = eval_kernel(&self.spec, self.pairs.first.row(p), w)?
                - eval_kernel(&self.spec, self.pairs.second.row(p), w)?;
        }
        Ok(out)
    }

    /// Coordinates of `Φ(w)` along the eigenfunctions, `β_k(w) = ⟨V_k, Φ(w)⟩`.
    pub fn beta_projection(&self, w: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(w)?;
        Ok(self.pair_weights().dot(&self.pair_differences(w)?))
    }

    /// `β` for every row of `x` (`n x K`).
    pub fn beta_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let weights = self.pair_weights();
        let mut out = Array2::zeros((x.nrows(), self.k()));
        for (i, row) in x.rows().into_iter().enumerate() {
            self.check_dim(row)?;
            out.row_mut(i).assign(&weights.dot(&self.pair_differences(row)?));
        }
        Ok(out)
    }

    pub fn metric(&self) -> CorrectedMetric<'_> {
        CorrectedMetric { model: self }
    }
}

/// A word reduced to what the corrected metric needs: the vector itself and
/// its `β` coordinates.
#[derive(Debug, Clone)]
pub struct ProjectedWord<'v> {
    pub vector: ArrayView1<'v, f64>,
    pub beta: Array1<f64>,
}

/// Inner products between feature-space neutralized words,
/// `⟨Φ_ntr(z), Φ_ntr(w)⟩ = κ(z, w) - Σ_k β_k(z) β_k(w)`.
#[derive(Debug, Clone, Copy)]
pub struct CorrectedMetric<'m> {
    pub model: &'m KernelBiasModel,
}

impl<'m> CorrectedMetric<'m> {
    pub fn project<'v>(&self, w: ArrayView1<'v, f64>) -> Result<ProjectedWord<'v>> {
        Ok(ProjectedWord {
            vector: w,
            beta: self.model.beta_projection(w)?,
        })
    }

    /// Corrected inner product of two pre-projected words.
    pub fn inner_projected(&self, z: &ProjectedWord<'_>, w: &ProjectedWord<'_>) -> Result<f64> {
        Ok(eval_kernel(&self.model.spec, z.vector, w.vector)? - z.beta.dot(&w.beta))
    }

    pub fn corrected_inner_product(&self, z: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> Result<f64> {
        self.inner_projected(&self.project(z)?, &self.project(w)?)
    }

    /// Cosine under the corrected inner product, clamped to `[-1, 1]`.
    pub fn cosine_projected(&self, z: &ProjectedWord<'_>, w: &ProjectedWord<'_>) -> Result<f64> {
        let zz = self.inner_projected(z, z)?;
        let ww = self.inner_projected(w, w)?;
        if zz <= 1e-12 {
            return Err(Error::FullyNeutralized("first argument".into()));
        }
        if ww <= 1e-12 {
            return Err(Error::FullyNeutralized("second argument".into()));
        }
        Ok((self.inner_projected(z, w)? / (zz * ww).sqrt()).clamp(-1.0, 1.0))
    }

    pub fn corrected_cosine(&self, z: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> Result<f64> {
        self.cosine_projected(&self.project(z)?, &self.project(w)?)
    }

    pub fn squared_distance_projected(&self, z: &ProjectedWord<'_>, w: &ProjectedWord<'_>) -> Result<f64> {
        let d = self.inner_projected(z, z)? - 2.0 * self.inner_projected(z, w)? + self.inner_projected(w, w)?;
        Ok(d.max(0.0))
    }

    /// Squared distance between neutralized feature images, clamped at 0.
    pub fn corrected_squared_distance(&self, z: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> Result<f64> {
        self.squared_distance_projected(&self.project(z)?, &self.project(w)?)
    }

    /// Inner product of a neutralized word with the equalized version of any
    /// member of `set`; the same value for every member.
    pub fn equalized_inner_product(&self, w: ArrayView1<'_, f64>, set: &[ArrayView1<'_, f64>]) -> Result<f64> {
        if set.len() < 2 {
            return Err(Error::InvalidArgument("equality sets need at least two members".into()));
        }
        let pw = self.project(w)?;
        let mut acc = 0.0;
        for e in set {
            acc += self.inner_projected(&pw, &self.project(*e)?)?;
        }
        Ok(acc / set.len() as f64)
    }

    /// `⟨Φ(w) - P_KΦ(w), P_KΦ(z)⟩`, computed as the difference between the
    /// projection-coordinate route `Σ β_k(w) β_k(z)` and the expansion route
    /// `Σ_jk β_j(w) β_k(z) ⟨V_j, V_k⟩`. Zero up to roundoff.
    pub fn orthogonality_check(&self, w: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> Result<f64> {
        let bw = self.model.beta_projection(w)?;
        let bz = self.model.beta_projection(z)?;
        let cross = bw.dot(&bz);
        let projected = bw.dot(&self.model.basis_gram.dot(&bz));
        Ok(cross - projected)
    }
}

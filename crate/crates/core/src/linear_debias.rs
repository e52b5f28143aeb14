//! Linear bias subspace: design matrix of set-centered defining words, bias
//! covariance, its top eigenvectors, and the neutralize/equalize corrections.

use std::collections::HashSet;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::symmetric_eig;

/// Relative threshold below which an eigenvalue counts as zero.
pub const RANK_EPS: f64 = 1e-10;

/// Word pairs that differ only in the protected attribute (he/she, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefiningSets {
    pairs: Vec<(usize, usize)>,
}

impl DefiningSets {
    /// Index pairs into `table`. Each word may appear in at most one pair.
    pub fn new(pairs: Vec<(usize, usize)>, table: &EmbeddingTable) -> Result<Self> {
        let mut seen = HashSet::new();
        for &(a, b) in &pairs {
            for i in [a, b] {
                if i >= table.len() {
                    return Err(Error::InvalidArgument(format!(
                        "word index {i} out of range for a vocabulary of {}",
                        table.len()
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidArgument(format!(
                        "word '{}' appears in more than one defining set",
                        table.word(i)
                    )));
                }
            }
        }
        Ok(DefiningSets { pairs })
    }

    /// Resolve word pairs, dropping (with a warning) any pair that has an
    /// out-of-vocabulary member.
    pub fn from_words<S: AsRef<str>>(pairs: &[[S; 2]], table: &EmbeddingTable) -> Result<Self> {
        let mut resolved = Vec::new();
        for [a, b] in pairs {
            match (table.lookup(a.as_ref()), table.lookup(b.as_ref())) {
                (Some(i), Some(j)) => resolved.push((i, j)),
                _ => warn!(
                    "dropping defining pair ({}, {}): not in vocabulary",
                    a.as_ref(),
                    b.as_ref()
                ),
            }
        }
        Self::new(resolved, table)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// All word indices, pair by pair.
    pub fn word_indices(&self) -> Vec<usize> {
        self.pairs.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    /// The pairs as owned vectors.
    pub fn vector_pairs(&self, table: &EmbeddingTable) -> Vec<(Array1<f64>, Array1<f64>)> {
        self.pairs
            .iter()
            .map(|&(a, b)| (table.row(a).to_owned(), table.row(b).to_owned()))
            .collect()
    }
}

/// Disjoint groups of words that should end up equidistant from neutral words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqualitySets {
    sets: Vec<Vec<usize>>,
}

impl EqualitySets {
    pub fn new(sets: Vec<Vec<usize>>, table: &EmbeddingTable) -> Result<Self> {
        let mut seen = HashSet::new();
        for set in &sets {
            if set.len() < 2 {
                return Err(Error::InvalidArgument("equality sets need at least two members".into()));
            }
            for &i in set {
                if i >= table.len() {
                    return Err(Error::InvalidArgument(format!("word index {i} out of range")));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidArgument(format!(
                        "word '{}' appears in more than one equality set",
                        table.word(i)
                    )));
                }
            }
        }
        Ok(EqualitySets { sets })
    }

    /// Resolve word sets. Out-of-vocabulary members are dropped; sets left
    /// with fewer than two members are dropped entirely.
    pub fn from_words<S: AsRef<str>>(sets: &[Vec<S>], table: &EmbeddingTable) -> Result<Self> {
        let mut resolved = Vec::new();
        for set in sets {
            let idx: Vec<usize> = set.iter().filter_map(|w| table.lookup(w.as_ref())).collect();
            if idx.len() < set.len() {
                warn!(
                    "equality set [{}] has out-of-vocabulary members",
                    set.iter().map(|w| w.as_ref()).collect::<Vec<_>>().join(", ")
                );
            }
            if idx.len() >= 2 {
                resolved.push(idx);
            }
        }
        Self::new(resolved, table)
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }
}

/// Contents of a sets JSON file:
/// `{"defining_sets": [["he","she"], ...], "equality_sets": [[...], ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SetsFile {
    pub defining_sets: Vec<[String; 2]>,
    #[serde(default)]
    pub equality_sets: Vec<Vec<String>>,
}

/// Design matrix with one row per defining-set word: the word vector minus
/// the mean of its pair. Rows come in pairs `(a - μ, b - μ)`.
pub fn build_design_matrix(table: &EmbeddingTable, sets: &DefiningSets) -> Result<Array2<f64>> {
    if sets.is_empty() {
        return Err(Error::InsufficientData("no defining sets".into()));
    }
    let d = table.dim();
    let mut w = Array2::zeros((2 * sets.len(), d));
    for (n, &(a, b)) in sets.pairs().iter().enumerate() {
        let (va, vb) = (table.row(a), table.row(b));
        let mu = (&va + &vb) * 0.5;
        w.row_mut(2 * n).assign(&(&va - &mu));
        w.row_mut(2 * n + 1).assign(&(&vb - &mu));
    }
    Ok(w)
}

/// Bias covariance `C = ½ WᵀW`.
pub fn bias_covariance(w: &Array2<f64>) -> Array2<f64> {
    let c = w.t().dot(w) * 0.5;
    // Make exactly symmetric.
    (&c + &c.t()) * 0.5
}

/// Orthonormal basis of the linear bias subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBiasModel {
    /// `K x d`, one basis vector per row.
    pub basis: Array2<f64>,
    /// Eigenvalues of the bias covariance for the retained directions.
    pub explained: Vec<f64>,
}

impl LinearBiasModel {
    pub fn k(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Coordinates `⟨w, v_k⟩`.
    pub fn coordinates(&self, w: ArrayView1<'_, f64>) -> Array1<f64> {
        self.basis.dot(&w)
    }

    /// `P_K w`.
    pub fn project(&self, w: ArrayView1<'_, f64>) -> Array1<f64> {
        self.basis.t().dot(&self.coordinates(w))
    }

    /// Projection matrix `Σ v_k v_kᵀ`.
    pub fn projection_matrix(&self) -> Array2<f64> {
        self.basis.t().dot(&self.basis)
    }
}

/// Top-`k` eigenvectors of the bias covariance.
pub fn fit_linear_subspace(table: &EmbeddingTable, sets: &DefiningSets, k: usize) -> Result<LinearBiasModel> {
    let d = table.dim();
    if k < 1 || k > d {
        return Err(Error::InvalidArgument(format!(
            "number of components must be in [1, {d}], got {k}"
        )));
    }
    let w = build_design_matrix(table, sets)?;
    let c = bias_covariance(&w);
    let eig = symmetric_eig(&c)?;
    let top = eig.eigenvalues[0];
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
    let basis = eig.eigenvectors.slice(ndarray::s![.., ..k]).t().to_owned();
    Ok(LinearBiasModel {
        basis,
        explained: eig.eigenvalues.iter().take(k).copied().collect(),
    })
}

/// `(I - P_K) w`.
pub fn neutralize_vector(model: &LinearBiasModel, w: ArrayView1<'_, f64>) -> Array1<f64> {
    &w - &model.project(w)
}

/// Neutralize every row of a table.
pub fn neutralize_table(model: &LinearBiasModel, table: &EmbeddingTable) -> Result<EmbeddingTable> {
    if model.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: table.dim(),
        });
    }
    let m = table.matrix();
    let coords = m.dot(&model.basis.t());
    let out = m - &coords.dot(&model.basis);
    table.with_matrix(out)
}

/// Equalize one equality set: every member becomes `ν + Z (w_B - μ_B)` with
/// the shared neutral part `ν = (I - P) μ` and `Z` chosen for unit norm.
/// Outputs are in the order of `members`.
pub fn equalize_set(model: &LinearBiasModel, table: &EmbeddingTable, members: &[usize]) -> Result<Vec<Array1<f64>>> {
    if members.len() < 2 {
        return Err(Error::InvalidArgument("equality sets need at least two members".into()));
    }
    let vectors: Vec<ArrayView1<'_, f64>> = members.iter().map(|&i| table.row(i)).collect();
    let mut mu = Array1::zeros(table.dim());
    for v in &vectors {
        mu += v;
    }
    mu /= members.len() as f64;
    let mu_b = model.project(mu.view());
    let nu = &mu - &mu_b;
    let nu_sq = nu.dot(&nu);
    if nu_sq > 1.0 + 1e-12 {
        return Err(Error::Numerical(format!(
            "neutral component of the set mean has norm {} > 1; cannot renormalize",
            nu_sq.sqrt()
        )));
    }
    let budget = (1.0 - nu_sq).max(0.0).sqrt();
    members
        .iter()
        .zip(&vectors)
        .map(|(&i, v)| {
            let diff = model.project(*v) - &mu_b;
            let norm = diff.dot(&diff).sqrt();
            if norm <= 1e-12 {
                return Err(Error::DegenerateMember(table.word(i).to_string()));
            }
            Ok(&nu + &(diff * (budget / norm)))
        })
        .collect()
}

/// Apply [`equalize_set`] to every set, returning a new table.
pub fn equalize_table(model: &LinearBiasModel, table: &EmbeddingTable, sets: &EqualitySets) -> Result<EmbeddingTable> {
    let mut m = table.matrix().clone();
    for set in sets.sets() {
        let eq = equalize_set(model, table, set)?;
        for (&i, v) in set.iter().zip(eq) {
            m.row_mut(i).assign(&v);
        }
    }
    table.with_matrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, d: usize, n_pairs: usize, extra: usize) -> (EmbeddingTable, DefiningSets) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(String, Vec<f64>)> = (0..2 * n_pairs + extra)
            .map(|i| (format!("w{i}"), (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let t = EmbeddingTable::from_rows(rows).unwrap();
        let pairs = (0..n_pairs).map(|n| (2 * n, 2 * n + 1)).collect();
        let s = DefiningSets::new(pairs, &t).unwrap();
        (t, s)
    }

    /// Covariance straight from its definition: Σ_n (1/|D_n|) Σ_{i∈D_n} (w_i-μ)(w_i-μ)ᵀ.
    fn direct_covariance(table: &EmbeddingTable, sets: &DefiningSets) -> Array2<f64> {
        let d = table.dim();
        let mut c = Array2::zeros((d, d));
        for &(a, b) in sets.pairs() {
            let mu: Vec<f64> = (0..d).map(|k| (table.row(a)[k] + table.row(b)[k]) / 2.0).collect();
            for i in [a, b] {
                for r in 0..d {
                    for s in 0..d {
                        c[[r, s]] += 0.5 * (table.row(i)[r] - mu[r]) * (table.row(i)[s] - mu[s]);
                    }
                }
            }
        }
        c
    }

    #[test]
    fn design_matrix_single_pair() {
        let t = EmbeddingTable::from_rows(vec![("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]).unwrap();
        let s = DefiningSets::new(vec![(0, 1)], &t).unwrap();
        let w = build_design_matrix(&t, &s).unwrap();
        assert_eq!(w, array![[0.5, -0.5], [-0.5, 0.5]]);
        assert_eq!(bias_covariance(&w), array![[0.25, -0.25], [-0.25, 0.25]]);
    }

    #[test]
    fn identical_pair_gives_zero_rows() {
        let t = EmbeddingTable::from_rows(vec![("a", vec![0.3, 0.4]), ("b", vec![0.3, 0.4])]).unwrap();
        let s = DefiningSets::new(vec![(0, 1)], &t).unwrap();
        let w = build_design_matrix(&t, &s).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
        assert!(bias_covariance(&w).iter().all(|&v| v == 0.0));
        assert!(matches!(
            fit_linear_subspace(&t, &s, 1),
            Err(Error::RankDeficient { available: 0, .. })
        ));
    }

    #[test]
    fn empty_sets_rejected() {
        let (t, _) = random_instance(1, 3, 1, 0);
        let s = DefiningSets::new(vec![], &t).unwrap();
        assert!(build_design_matrix(&t, &s).is_err());
    }

    #[test]
    fn word_in_two_pairs_rejected() {
        let (t, _) = random_instance(1, 3, 2, 0);
        assert!(DefiningSets::new(vec![(0, 1), (1, 2)], &t).is_err());
        assert!(DefiningSets::new(vec![(0, 9)], &t).is_err());
    }

    #[test]
    fn oov_pairs_dropped() {
        let (t, _) = random_instance(1, 3, 2, 0);
        let s = DefiningSets::from_words(&[["w0", "w1"], ["w2", "zzz"]], &t).unwrap();
        assert_eq!(s.pairs(), &[(0, 1)]);
    }

    proptest! {
        #[test]
        fn covariance_matches_direct_definition(seed in 0u64..1000, d in 1usize..9, n in 1usize..6) {
            let (t, s) = random_instance(seed, d, n, 0);
            let w = build_design_matrix(&t, &s).unwrap();
            let c = bias_covariance(&w);
            let direct = direct_covariance(&t, &s);
            for (x, y) in c.iter().zip(direct.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            for col in w.columns() {
                prop_assert!(col.sum().abs() <= 1e-12);
            }
        }

        #[test]
        fn neutralize_is_a_projection(seed in 0u64..500) {
            let (t, s) = random_instance(seed, 5, 4, 3);
            let m = fit_linear_subspace(&t, &s, 2).unwrap();
            let w = t.row(8);
            let once = neutralize_vector(&m, w);
            let twice = neutralize_vector(&m, once.view());
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            for v in m.basis.rows() {
                prop_assert!(v.dot(&once).abs() <= 1e-10);
            }
            let recomposed = &once + &m.project(w);
            for (a, b) in recomposed.iter().zip(w.iter()) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn single_pair_direction() {
        let t = EmbeddingTable::from_rows(vec![("a", vec![0.9, 0.2]), ("b", vec![0.1, 0.6])]).unwrap();
        let s = DefiningSets::new(vec![(0, 1)], &t).unwrap();
        let m = fit_linear_subspace(&t, &s, 1).unwrap();
        let diff: Array1<f64> = array![0.8, -0.4];
        let diff = &diff / diff.dot(&diff).sqrt();
        let cos = m.basis.row(0).dot(&diff);
        assert!((cos.abs() - 1.0).abs() < 1e-12);
        // C = ½ Σ rows rowᵀ with rows ±diff/2: eigenvalue = ‖a-b‖²/4
        assert!((m.explained[0] - 0.8 / 4.0).abs() < 1e-12);
        assert!(matches!(
            fit_linear_subspace(&t, &s, 2),
            Err(Error::RankDeficient {
                requested: 2,
                available: 1
            })
        ));
    }

    #[test]
    fn full_rank_basis_spans_space() {
        let (t, s) = random_instance(3, 3, 5, 0);
        let m = fit_linear_subspace(&t, &s, 3).unwrap();
        let p = m.projection_matrix();
        assert!((&p - &Array2::<f64>::eye(3)).iter().all(|v| v.abs() < 1e-10));
        for w in m.explained.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let v = m.basis.dot(&m.basis.t());
        assert!((&v - &Array2::<f64>::eye(3)).iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn neutralize_edge_cases() {
        let (t, s) = random_instance(4, 4, 3, 0);
        let m = fit_linear_subspace(&t, &s, 1).unwrap();
        let inside = m.basis.row(0).to_owned() * 2.5;
        assert!(neutralize_vector(&m, inside.view()).iter().all(|v| v.abs() < 1e-12));
        let p = m.projection_matrix();
        let x = array![0.3, -0.2, 0.7, 0.1];
        let perp = &x - &p.dot(&x);
        let out = neutralize_vector(&m, perp.view());
        assert!(out.iter().zip(perp.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    fn unit(v: Array1<f64>) -> Array1<f64> {
        let n = v.dot(&v).sqrt();
        v / n
    }

    #[test]
    fn equalize_symmetric_pair_gives_reflections() {
        // Bias direction e1; pair mirrored across the complement of e1.
        let t = EmbeddingTable::from_rows(vec![
            ("he", vec![1.0, 0.0, 0.0]),
            ("she", vec![-1.0, 0.0, 0.0]),
            ("king", unit(array![0.6, 0.5, 0.3]).to_vec()),
            ("queen", unit(array![-0.6, 0.5, 0.3]).to_vec()),
        ])
        .unwrap();
        let s = DefiningSets::new(vec![(0, 1)], &t).unwrap();
        let m = fit_linear_subspace(&t, &s, 1).unwrap();
        let out = equalize_set(&m, &t, &[2, 3]).unwrap();
        for v in &out {
            assert!((v.dot(v).sqrt() - 1.0).abs() < 1e-10);
        }
        assert!((out[0][0] + out[1][0]).abs() < 1e-12);
        assert!((out[0][1] - out[1][1]).abs() < 1e-12);
        assert!((out[0][2] - out[1][2]).abs() < 1e-12);
        // Already symmetric and unit-norm, so equalizing leaves them unchanged.
        assert!((&out[0] - &t.row(2)).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn equalize_random_sets() {
        for seed in 0..20 {
            let (t, s) = random_instance(seed, 6, 4, 4);
            let t = crate::embeddings::unit_normalize(&t).unwrap();
            let m = fit_linear_subspace(&t, &s, 2).unwrap();
            let members = [8, 9, 10];
            let out = equalize_set(&m, &t, &members).unwrap();
            let nu0 = neutralize_vector(&m, out[0].view());
            for v in &out {
                assert!((v.dot(v).sqrt() - 1.0).abs() < 1e-10);
                let nu = neutralize_vector(&m, v.view());
                assert!((&nu - &nu0).iter().all(|x| x.abs() < 1e-10));
            }
            // Any neutralized word has the same inner product with every member.
            let w = neutralize_vector(&m, t.row(11));
            let ips: Vec<f64> = out.iter().map(|e| w.dot(e)).collect();
            assert!(ips.iter().all(|x| (x - ips[0]).abs() < 1e-10));
        }
    }

    #[test]
    fn equalize_degenerate_member() {
        let t = EmbeddingTable::from_rows(vec![
            ("he", vec![1.0, 0.0]),
            ("she", vec![-1.0, 0.0]),
            ("x", vec![0.0, 1.0]),
            ("y", vec![0.0, 1.0]),
        ])
        .unwrap();
        let s = DefiningSets::new(vec![(0, 1)], &t).unwrap();
        let m = fit_linear_subspace(&t, &s, 1).unwrap();
        match equalize_set(&m, &t, &[2, 3]) {
            Err(Error::DegenerateMember(w)) => assert_eq!(w, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn equalize_rejects_oversized_neutral_part() {
        let t = EmbeddingTable::from_rows(vec![
            ("he", vec![1.0, 0.0]),
            ("she", vec![-1.0, 0.0]),
            ("x", vec![0.5, 2.0]),
            ("y", vec![-0.5, 2.0]),
        ])
        .unwrap();
        let s = DefiningSets::new(vec![(0, 1)], &t).unwrap();
        let m = fit_linear_subspace(&t, &s, 1).unwrap();
        assert!(matches!(equalize_set(&m, &t, &[2, 3]), Err(Error::Numerical(_))));
    }

    #[test]
    fn sets_file_json() {
        let f: SetsFile = serde_json::from_str(
            r#"{"defining_sets": [["he","she"],["man","woman"]], "equality_sets": [["king","queen"]]}"#,
        )
        .unwrap();
        assert_eq!(f.defining_sets.len(), 2);
        assert_eq!(f.equality_sets[0], vec!["king", "queen"]);
        let g: SetsFile = serde_json::from_str(r#"{"defining_sets": []}"#).unwrap();
        assert!(g.equality_sets.is_empty());
    }
}

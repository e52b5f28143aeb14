//! Bias and quality benchmarks that can run over the raw embedding space,
//! the linearly neutralized space, or a corrected kernel metric.

mod classify;
mod professions;
mod simlex;
mod svm;
mod weat;

pub use classify::{indirect_bias_classification, ClassificationConfig, ClassificationResult};
pub use professions::{original_bias, professions_correlation, ProfessionsResult};
pub use simlex::{parse_simlex, simlex_eval, SimlexPair, SimlexResult};
pub use svm::{svm_predict, svm_train, ClassifierKernel, SvmModel, SvmParams};
pub use weat::{exhaustive_limit, weat_association, weat_test, PermutationMode, WeatConfig, WeatCounts, WeatResult};

use ndarray::{ArrayView1, CowArray, Ix1};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kernel_debias::CorrectedMetric;
use crate::linear_debias::LinearBiasModel;

/// Word-level similarity used by WEAT, the professions test and SimLex.
pub trait SimilarityBackend {
    /// Short label for result files (`raw`, `linear`, `kernel:rbf`, ...).
    fn name(&self) -> String;
    fn contains(&self, word: &str) -> bool;
    fn similarity(&self, a: &str, b: &str) -> Result<f64>;
}

/// Inner-product geometry on input vectors.
#[derive(Debug, Clone, Copy)]
pub enum Geometry<'m> {
    /// Plain dot product.
    Euclidean,
    /// Dot product of linearly neutralized vectors.
    LinearNeutralized(&'m LinearBiasModel),
    /// Corrected RKHS inner product.
    Corrected(CorrectedMetric<'m>),
}

/// A point prepared for repeated inner products under a [`Geometry`].
#[derive(Debug, Clone)]
pub struct Prepared<'v> {
    vector: CowArray<'v, f64, Ix1>,
    beta: Option<ndarray::Array1<f64>>,
    self_inner: f64,
}

impl Prepared<'_> {
    pub fn self_inner(&self) -> f64 {
        self.self_inner
    }
}

impl<'m> Geometry<'m> {
    pub fn name(&self) -> String {
        match self {
            Geometry::Euclidean => "raw".into(),
            Geometry::LinearNeutralized(_) => "linear".into(),
            Geometry::Corrected(m) => format!("kernel:{}", m.model.spec.family()),
        }
    }

    pub fn prepare<'v>(&self, x: ArrayView1<'v, f64>) -> Result<Prepared<'v>> {
        let mut p = match self {
            Geometry::Euclidean => Prepared {
                vector: CowArray::from(x),
                beta: None,
                self_inner: 0.0,
            },
            Geometry::LinearNeutralized(model) => {
                if model.dim() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: model.dim(),
                        got: x.len(),
                    });
                }
                Prepared {
                    vector: CowArray::from(crate::linear_debias::neutralize_vector(model, x)),
                    beta: None,
                    self_inner: 0.0,
                }
            }
            Geometry::Corrected(metric) => Prepared {
                vector: CowArray::from(x),
                beta: Some(metric.model.beta_projection(x)?),
                self_inner: 0.0,
            },
        };
        p.self_inner = self.inner(&p, &p)?;
        Ok(p)
    }

    pub fn inner(&self, a: &Prepared<'_>, b: &Prepared<'_>) -> Result<f64> {
        match self {
            Geometry::Euclidean | Geometry::LinearNeutralized(_) => {
                if a.vector.len() != b.vector.len() {
                    return Err(Error::DimensionMismatch {
                        expected: a.vector.len(),
                        got: b.vector.len(),
                    });
                }
                Ok(a.vector.dot(&b.vector))
            }
            Geometry::Corrected(metric) => {
                let k = crate::kernels::eval_kernel(&metric.model.spec, a.vector.view(), b.vector.view())?;
                let (ba, bb) = (a.beta.as_ref().expect("prepared"), b.beta.as_ref().expect("prepared"));
                Ok(k - ba.dot(bb))
            }
        }
    }

    /// Squared distance from inner products, clamped at zero.
    pub fn squared_distance(&self, a: &Prepared<'_>, b: &Prepared<'_>) -> Result<f64> {
        Ok((a.self_inner - 2.0 * self.inner(a, b)? + b.self_inner).max(0.0))
    }

    /// Cosine from inner products, clamped to `[-1, 1]`.
    pub fn cosine(&self, a: &Prepared<'_>, b: &Prepared<'_>) -> Result<f64> {
        let denom = (a.self_inner * b.self_inner).sqrt();
        if !(a.self_inner > 1e-12 && b.self_inner > 1e-12) {
            return Err(Error::FullyNeutralized("cosine argument".into()));
        }
        Ok((self.inner(a, b)? / denom).clamp(-1.0, 1.0))
    }
}

/// Cosine similarity over an embedding table under some [`Geometry`].
/// Every word is prepared up front.
pub struct EmbeddingSimilarity<'t> {
    table: &'t EmbeddingTable,
    geometry: Geometry<'t>,
    prepared: Vec<Prepared<'t>>,
}

impl<'t> EmbeddingSimilarity<'t> {
    pub fn new(table: &'t EmbeddingTable, geometry: Geometry<'t>) -> Result<Self> {
        let prepared = (0..table.len())
            .map(|i| geometry.prepare(table.row(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingSimilarity {
            table,
            geometry,
            prepared,
        })
    }

    pub fn table(&self) -> &EmbeddingTable {
        self.table
    }

    pub fn geometry(&self) -> Geometry<'t> {
        self.geometry
    }

    fn index(&self, word: &str) -> Result<usize> {
        self.table
            .lookup(word)
            .ok_or_else(|| Error::InsufficientData(format!("'{word}' is not in the vocabulary")))
    }

    /// Similarity by row index.
    pub fn similarity_idx(&self, i: usize, j: usize) -> Result<f64> {
        self.geometry
            .cosine(&self.prepared[i], &self.prepared[j])
            .map_err(|e| match e {
                Error::FullyNeutralized(_) => {
                    let w = if self.prepared[i].self_inner <= 1e-12 { i } else { j };
                    Error::FullyNeutralized(self.table.word(w).to_string())
                }
                other => other,
            })
    }
}

impl SimilarityBackend for EmbeddingSimilarity<'_> {
    fn name(&self) -> String {
        self.geometry.name()
    }

    fn contains(&self, word: &str) -> bool {
        self.table.contains(word)
    }

    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        self.similarity_idx(self.index(a)?, self.index(b)?)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::collections::HashMap;

    use super::*;

    /// Backend with hand-set similarities; unknown pairs default to 0.
    pub struct StubBackend {
        pub words: Vec<String>,
        pub sims: HashMap<(String, String), f64>,
    }

    impl StubBackend {
        pub fn new(words: &[&str]) -> Self {
            StubBackend {
                words: words.iter().map(|w| w.to_string()).collect(),
                sims: HashMap::new(),
            }
        }

        pub fn set(&mut self, a: &str, b: &str, v: f64) {
            self.sims.insert((a.into(), b.into()), v);
            self.sims.insert((b.into(), a.into()), v);
        }
    }

    impl SimilarityBackend for StubBackend {
        fn name(&self) -> String {
            "stub".into()
        }

        fn contains(&self, word: &str) -> bool {
            self.words.iter().any(|w| w == word)
        }

        fn similarity(&self, a: &str, b: &str) -> Result<f64> {
            if a == b {
                return Ok(1.0);
            }
            Ok(*self.sims.get(&(a.to_string(), b.to_string())).unwrap_or(&0.0))
        }
    }
}

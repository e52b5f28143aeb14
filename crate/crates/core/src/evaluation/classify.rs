//! Indirect-bias classification: train a kernel SVM to recover each word's
//! original gender label from its corrected geometry.
//!
//! Labels are the sign of `cos(w, he - she)` in the original space. The most
//! biased words (by absolute original bias) are shuffled with a seeded stream
//! and split into train and test sets.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::professions::original_bias;
use super::svm::{svm_train, SvmParams};
use super::Geometry;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassificationConfig {
    pub most_biased: usize,
    pub train: usize,
    pub test: usize,
    pub seed: u64,
    pub direction: (String, String),
    /// `None` uses [`SvmParams::with_dim`].
    pub svm: Option<SvmParams>,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        ClassificationConfig {
            most_biased: 5000,
            train: 1000,
            test: 4000,
            seed: 42,
            direction: ("he".into(), "she".into()),
            svm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_positive: usize,
}

/// Run the protocol. `original` supplies the labels; `features` supplies the
/// vectors fed through `geometry` (the same table for metric corrections, a
/// rewritten table for vector corrections).
pub fn indirect_bias_classification(
    original: &EmbeddingTable,
    features: &EmbeddingTable,
    geometry: &Geometry<'_>,
    cfg: &ClassificationConfig,
) -> Result<ClassificationResult> {
    if cfg.train == 0 || cfg.test == 0 {
        return Err(Error::InvalidArgument("train and test sizes must be positive".into()));
    }
    let (he, she) = (cfg.direction.0.as_str(), cfg.direction.1.as_str());
    let candidates: Vec<String> = original
        .words()
        .iter()
        .filter(|w| w.as_str() != he && w.as_str() != she && features.contains(w))
        .cloned()
        .collect();
    let bias = original_bias(original, &candidates, (he, she))?;

    let mut ranked: Vec<usize> = (0..candidates.len()).filter(|&i| bias[i] != 0.0).collect();
    ranked.sort_by(|&i, &j| bias[j].abs().total_cmp(&bias[i].abs()).then(i.cmp(&j)));
    ranked.truncate(cfg.most_biased);
    if ranked.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} labelled words available for classification",
            ranked.len()
        )));
    }
    ranked.shuffle(&mut rng::stream(cfg.seed, "classify"));

    let n_train = cfg.train.min(ranked.len() / 2).max(2);
    let n_test = cfg.test.min(ranked.len() - n_train);
    let (train_idx, rest) = ranked.split_at(n_train);
    let test_idx = &rest[..n_test];

    let gather = |idx: &[usize]| -> Result<(Array2<f64>, Vec<i8>)> {
        let rows: Vec<usize> = idx
            .iter()
            .map(|&i| features.lookup(&candidates[i]).expect("filtered"))
            .collect();
        let labels = idx.iter().map(|&i| if bias[i] > 0.0 { 1 } else { -1 }).collect();
        Ok((features.matrix().select(Axis(0), &rows), labels))
    };
    let (xtr, ytr) = gather(train_idx)?;
    let (xte, yte) = gather(test_idx)?;

    let params = cfg.svm.unwrap_or_else(|| SvmParams::with_dim(features.dim()));
    let model = svm_train(geometry, xtr.view(), &ytr, params)?;
    let accuracy = |x: &Array2<f64>, y: &[i8]| -> Result<f64> {
        if y.is_empty() {
            return Ok(f64::NAN);
        }
        let f = model.decision_values(geometry, x.view())?;
        let hits = f
            .iter()
            .zip(y)
            .filter(|(v, &l)| (if **v >= 0.0 { 1 } else { -1 }) == l)
            .count();
        Ok(hits as f64 / y.len() as f64)
    };
    Ok(ClassificationResult {
        train_accuracy: accuracy(&xtr, &ytr)?,
        test_accuracy: accuracy(&xte, &yte)?,
        n_train,
        n_test,
        n_positive: ytr.iter().chain(&yte).filter(|&&l| l == 1).count(),
    })
}

//! Professions test: does a profession's neighbourhood still reveal its
//! original gender bias after correction?
//!
//! For each profession we count how many of its `k` nearest neighbours
//! (under the backend being evaluated) belong to the male lexicon, and report
//! the Pearson correlation between those counts and the profession's
//! original bias `cos(w, he - she)` in the uncorrected space.

use std::collections::HashSet;

use log::warn;
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::SimilarityBackend;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfessionsResult {
    pub correlation: f64,
    pub professions_used: usize,
    pub neighbors: usize,
    pub male_counts: Vec<usize>,
    pub original_bias: Vec<f64>,
}

/// `cos(w, direction_a - direction_b)` in `table`, for every word in `words`.
pub fn original_bias(table: &EmbeddingTable, words: &[String], direction: (&str, &str)) -> Result<Vec<f64>> {
    let a = table
        .vector(direction.0)
        .ok_or_else(|| Error::InsufficientData(format!("'{}' is not in the vocabulary", direction.0)))?;
    let b = table
        .vector(direction.1)
        .ok_or_else(|| Error::InsufficientData(format!("'{}' is not in the vocabulary", direction.1)))?;
    let dir: Array1<f64> = &a - &b;
    let dn = dir.dot(&dir).sqrt();
    if dn == 0.0 {
        return Err(Error::Numerical("bias direction is the zero vector".into()));
    }
    words
        .iter()
        .map(|w| {
            let v = table
                .vector(w)
                .ok_or_else(|| Error::InsufficientData(format!("'{w}' is not in the vocabulary")))?;
            let n = v.dot(&v).sqrt();
            if n == 0.0 {
                return Err(Error::ZeroVector(w.clone()));
            }
            Ok(v.dot(&dir) / (n * dn))
        })
        .collect()
}

/// Indices of the `k` candidates most similar to `word` (ties broken by
/// candidate order), excluding `word` itself.
fn nearest<S: SimilarityBackend + ?Sized>(sim: &S, word: &str, candidates: &[String], k: usize) -> Result<Vec<usize>> {
    let mut scored = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        if c != word {
            scored.push((sim.similarity(word, c)?, i));
        }
    }
    let cmp = |x: &(f64, usize), y: &(f64, usize)| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1));
    let k = k.min(scored.len());
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    scored.truncate(k);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}

/// Pearson correlation between male-neighbour counts and original bias.
///
/// `candidates` is the neighbour pool (e.g. the full vocabulary, or
/// professions plus the gendered lexicons). `direction` names the two words
/// spanning the original bias direction, normally `("he", "she")`.
#[allow(clippy::too_many_arguments)]
pub fn professions_correlation<S: SimilarityBackend + ?Sized>(
    sim: &S,
    original: &EmbeddingTable,
    professions: &[String],
    male_words: &[String],
    candidates: &[String],
    k_neighbors: usize,
    direction: (&str, &str),
) -> Result<ProfessionsResult> {
    if k_neighbors == 0 {
        return Err(Error::InvalidArgument("neighbour count must be positive".into()));
    }
    let used: Vec<String> = professions
        .iter()
        .filter(|p| original.contains(p) && sim.contains(p))
        .cloned()
        .collect();
    if used.len() < professions.len() {
        warn!("{} professions out of vocabulary", professions.len() - used.len());
    }
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 professions in vocabulary, have {}",
            used.len()
        )));
    }
    let pool: Vec<String> = candidates.iter().filter(|c| sim.contains(c)).cloned().collect();
    let male: HashSet<&str> = male_words.iter().map(String::as_str).collect();

    let bias = original_bias(original, &used, direction)?;
    let mut counts = Vec::with_capacity(used.len());
    for p in &used {
        let nn = nearest(sim, p, &pool, k_neighbors)?;
        counts.push(nn.iter().filter(|&&i| male.contains(pool[i].as_str())).count());
    }
    let counts_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let correlation = pearson(&counts_f, &bias).map_err(|e| match e {
        Error::Numerical(_) => {
            Error::Numerical("male-neighbour counts (or biases) are constant; correlation undefined".into())
        }
        other => other,
    })?;
    Ok(ProfessionsResult {
        correlation,
        professions_used: used.len(),
        neighbors: k_neighbors.min(pool.len().saturating_sub(1)),
        male_counts: counts,
        original_bias: bias,
    })
}

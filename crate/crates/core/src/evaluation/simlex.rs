//! Word-similarity quality: Spearman correlation against human ratings.

use std::io::BufRead;

use log::warn;
use serde::{Deserialize, Serialize};

use super::SimilarityBackend;
use crate::error::{Error, Result};
use crate::numerics::spearman;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimlexPair {
    pub first: String,
    pub second: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimlexResult {
    pub rho: f64,
    pub used: usize,
    pub dropped: usize,
}

/// Tab-separated `word1 word2 score [...]`. A first line whose score column is
/// not numeric is treated as a header; extra columns are ignored.
pub fn parse_simlex<R: BufRead>(reader: R) -> Result<Vec<SimlexPair>> {
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() < 3 {
            return Err(Error::Parse {
                line: n + 1,
                msg: format!("expected at least 3 tab-separated columns, got {}", cols.len()),
            });
        }
        let score = match cols[2].parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            Ok(_) => {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: "score is not finite".into(),
                })
            }
            Err(_) if n == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("bad score '{}': {e}", cols[2]),
                })
            }
        };
        pairs.push(SimlexPair {
            first: cols[0].to_string(),
            second: cols[1].to_string(),
            score,
        });
    }
    Ok(pairs)
}

pub fn simlex_eval<S: SimilarityBackend + ?Sized>(sim: &S, pairs: &[SimlexPair]) -> Result<SimlexResult> {
    let mut model = Vec::new();
    let mut gold = Vec::new();
    for p in pairs {
        if sim.contains(&p.first) && sim.contains(&p.second) {
            model.push(sim.similarity(&p.first, &p.second)?);
            gold.push(p.score);
        }
    }
    let dropped = pairs.len() - model.len();
    if dropped > 0 {
        warn!("{dropped} of {} similarity pairs out of vocabulary", pairs.len());
    }
    if model.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 scorable pairs, have {}",
            model.len()
        )));
    }
    Ok(SimlexResult {
        rho: spearman(&model, &gold)?,
        used: model.len(),
        dropped,
    })
}

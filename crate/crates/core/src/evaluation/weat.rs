//! Word Embedding Association Test.
//!
//! For a word `w`, `s(w, A, B) = mean_a sim(w, a) - mean_b sim(w, b)`.
//! The effect size is `(mean_X s - mean_Y s) / std_{X∪Y} s` (population
//! standard deviation), the test statistic is `S = Σ_X s - Σ_Y s`, and the
//! one-sided p-value is the fraction of equal-size re-splits of `X ∪ Y`
//! whose statistic is at least the observed one.

use itertools::Itertools;
use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::SimilarityBackend;
use crate::error::{Error, Result};
use crate::rng;

/// Exhaustive enumeration is used up to this many splits.
pub const EXHAUSTIVE_LIMIT: u64 = 20_000;

pub fn exhaustive_limit() -> u64 {
    EXHAUSTIVE_LIMIT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    /// Exhaustive when the number of splits is at most [`EXHAUSTIVE_LIMIT`].
    #[default]
    Auto,
    Exhaustive,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatConfig {
    #[serde(rename = "X")]
    pub x: Vec<String>,
    #[serde(rename = "Y")]
    pub y: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<String>,
    #[serde(rename = "B")]
    pub b: Vec<String>,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub mode: PermutationMode,
}

fn default_permutations() -> usize {
    100_000
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeatCounts {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatResult {
    pub effect_size: f64,
    pub p_value: f64,
    pub statistic: f64,
    pub n_used: WeatCounts,
    pub exhaustive: bool,
    /// Number of splits evaluated (all of them when exhaustive).
    pub permutations: u64,
}

/// Differential association of `w` with attribute sets `A` and `B`.
pub fn weat_association<S: SimilarityBackend + ?Sized>(sim: &S, w: &str, a: &[String], b: &[String]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty attribute set".into()));
    }
    let mean = |set: &[String]| -> Result<f64> {
        let mut acc = 0.0;
        for t in set {
            acc += sim.similarity(w, t)?;
        }
        Ok(acc / set.len() as f64)
    };
    Ok(mean(a)? - mean(b)?)
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Statistic comparisons allow this much roundoff relative to `Σ|s|`.
const TIE_TOL: f64 = 1e-12;

pub fn weat_test<S: SimilarityBackend + ?Sized>(sim: &S, cfg: &WeatConfig) -> Result<WeatResult> {
    let keep = |set: &[String], label: &str| -> Vec<String> {
        let kept: Vec<String> = set.iter().filter(|w| sim.contains(w)).cloned().collect();
        if kept.len() < set.len() {
            warn!(
                "WEAT set {label}: {} of {} words out of vocabulary",
                set.len() - kept.len(),
                set.len()
            );
        }
        kept
    };
    let mut x = keep(&cfg.x, "X");
    let mut y = keep(&cfg.y, "Y");
    let a = keep(&cfg.a, "A");
    let b = keep(&cfg.b, "B");
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "an attribute set is empty after vocabulary filtering".into(),
        ));
    }
    if x.len() != y.len() {
        let n = x.len().min(y.len());
        warn!("WEAT target sets truncated to {n} words each");
        x.truncate(n);
        y.truncate(n);
    }
    if x.len() + y.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "WEAT needs at least 4 target words, have {}",
            x.len() + y.len()
        )));
    }

    let scores: Vec<f64> = x
        .iter()
        .chain(&y)
        .map(|w| weat_association(sim, w, &a, &b))
        .collect::<Result<_>>()?;
    let nx = x.len();
    let n = scores.len();

    let mean_x = scores[..nx].iter().sum::<f64>() / nx as f64;
    let mean_y = scores[nx..].iter().sum::<f64>() / (n - nx) as f64;
    let mean_all = scores.iter().sum::<f64>() / n as f64;
    let std = (scores.iter().map(|s| (s - mean_all).powi(2)).sum::<f64>() / n as f64).sqrt();
    let scale = scores.iter().map(|s| s.abs()).fold(0.0, f64::max);
    if std.is_nan() || std <= 1e-12 * scale.max(1e-300) {
        return Err(Error::Numerical(
            "association scores have zero spread; effect size undefined".into(),
        ));
    }
    let effect_size = (mean_x - mean_y) / std;

    let total: f64 = scores.iter().sum();
    let observed_sum: f64 = scores[..nx].iter().sum();
    let statistic = 2.0 * observed_sum - total;
    let tol = TIE_TOL * scores.iter().map(|s| s.abs()).sum::<f64>();
    // S_perm >= S_obs  <=>  Σ_{X'} s >= Σ_X s
    let at_least = |sum: f64| sum >= observed_sum - tol;

    let splits = binomial(n as u64, nx as u64);
    let exhaustive = match cfg.mode {
        PermutationMode::Exhaustive => true,
        PermutationMode::MonteCarlo => false,
        PermutationMode::Auto => splits <= EXHAUSTIVE_LIMIT,
    };

    let (hits, evaluated) = if exhaustive {
        let mut hits = 0u64;
        for combo in (0..n).combinations(nx) {
            let sum: f64 = combo.iter().map(|&i| scores[i]).sum();
            if at_least(sum) {
                hits += 1;
            }
        }
        (hits, splits)
    } else {
        if cfg.permutations == 0 {
            return Err(Error::InvalidArgument("permutations must be positive".into()));
        }
        let mut rng = rng::stream(cfg.seed, "weat");
        let mut idx: Vec<usize> = (0..n).collect();
        let mut hits = 0u64;
        for _ in 0..cfg.permutations {
            let (chosen, _) = idx.partial_shuffle(&mut rng, nx);
            let sum: f64 = chosen.iter().map(|&i| scores[i]).sum();
            if at_least(sum) {
                hits += 1;
            }
        }
        (hits, cfg.permutations as u64)
    };

    Ok(WeatResult {
        effect_size,
        p_value: hits as f64 / evaluated as f64,
        statistic,
        n_used: WeatCounts {
            x: nx,
            y: n - nx,
            a: a.len(),
            b: b.len(),
        },
        exhaustive,
        permutations: evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::test_support::StubBackend;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Stub where every target's association equals `scores[i]`: sim(t, a) = score, sim(t, b) = 0.
    fn score_stub(x: &[&str], y: &[&str], scores: &[f64]) -> (StubBackend, WeatConfig) {
        let mut words: Vec<&str> = x.iter().chain(y).copied().collect();
        words.extend(["attr_a", "attr_b"]);
        let mut stub = StubBackend::new(&words);
        for (w, s) in x.iter().chain(y).zip(scores) {
            stub.set(w, "attr_a", *s);
            stub.set(w, "attr_b", 0.0);
        }
        let cfg = WeatConfig {
            x: strings(x),
            y: strings(y),
            a: strings(&["attr_a"]),
            b: strings(&["attr_b"]),
            permutations: 100_000,
            seed: 42,
            mode: PermutationMode::Auto,
        };
        (stub, cfg)
    }

    #[test]
    fn association_examples() {
        let mut stub = StubBackend::new(&["w", "a1", "a2", "b1", "b2"]);
        stub.set("w", "a1", 0.9);
        stub.set("w", "a2", 0.1);
        stub.set("w", "b1", 0.2);
        stub.set("w", "b2", 0.2);
        let a = strings(&["a1", "a2"]);
        let b = strings(&["b1", "b2"]);
        let s = weat_association(&stub, "w", &a, &b).unwrap();
        assert!((s - 0.3).abs() < 1e-15);
        assert_eq!(weat_association(&stub, "w", &a, &a).unwrap(), 0.0);
        assert!(weat_association(&stub, "w", &[], &b).is_err());
    }

    #[test]
    fn hand_case_plus_minus_one() {
        let (stub, cfg) = score_stub(
            &["x1", "x2", "x3"],
            &["y1", "y2", "y3"],
            &[1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
        );
        let r = weat_test(&stub, &cfg).unwrap();
        assert_eq!(r.effect_size, 2.0);
        assert_eq!(r.p_value, 0.05);
        assert_eq!(r.statistic, 6.0);
        assert!(r.exhaustive);
        assert_eq!(r.permutations, 20);
    }

    #[test]
    fn exchangeable_null() {
        let (stub, cfg) = score_stub(
            &["x1", "x2", "x3"],
            &["y1", "y2", "y3"],
            &[0.1, 0.2, 0.3, 0.1, 0.2, 0.3],
        );
        let r = weat_test(&stub, &cfg).unwrap();
        assert_eq!(r.effect_size, 0.0);
        // 6 of the 20 splits exceed S = 0 and 8 tie with it.
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 14.0 / 20.0);
    }

    #[test]
    fn truncation_and_oov() {
        let (stub, mut cfg) = score_stub(
            &["x1", "x2", "x3"],
            &["y1", "y2", "y3"],
            &[0.5, 0.4, 0.3, 0.1, 0.0, -0.2],
        );
        cfg.y.push("missing".into());
        cfg.x.push("also-missing".into());
        cfg.x.remove(0);
        let r = weat_test(&stub, &cfg).unwrap();
        assert_eq!(r.n_used.x, 2);
        assert_eq!(r.n_used.y, 2);
    }

    #[test]
    fn too_few_targets_or_attributes() {
        let (stub, mut cfg) = score_stub(&["x1"], &["y1"], &[1.0, -1.0]);
        assert!(matches!(weat_test(&stub, &cfg), Err(Error::InsufficientData(_))));
        cfg.a = strings(&["nope"]);
        assert!(matches!(weat_test(&stub, &cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zero_spread_is_an_error() {
        let (stub, cfg) = score_stub(&["x1", "x2"], &["y1", "y2"], &[0.5, 0.5, 0.5, 0.5]);
        assert!(matches!(weat_test(&stub, &cfg), Err(Error::Numerical(_))));
    }

    #[test]
    fn effect_size_invariant_under_affine_map() {
        let scores = [0.9, 0.4, 0.35, 0.1, -0.2, 0.05, 0.3, -0.4];
        let (stub, cfg) = score_stub(&["x1", "x2", "x3", "x4"], &["y1", "y2", "y3", "y4"], &scores);
        let scaled: Vec<f64> = scores.iter().map(|s| 3.0 * s + 0.7).collect();
        let (stub2, cfg2) = score_stub(&["x1", "x2", "x3", "x4"], &["y1", "y2", "y3", "y4"], &scaled);
        let r1 = weat_test(&stub, &cfg).unwrap();
        let r2 = weat_test(&stub2, &cfg2).unwrap();
        assert!((r1.effect_size - r2.effect_size).abs() < 1e-12);
        assert_eq!(r1.p_value, r2.p_value);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let scores = [0.9, 0.4, 0.35, 0.1, -0.2, 0.05, 0.3, -0.4];
        let (stub, mut cfg) = score_stub(&["x1", "x2", "x3", "x4"], &["y1", "y2", "y3", "y4"], &scores);
        cfg.mode = PermutationMode::MonteCarlo;
        cfg.permutations = 5_000;
        let r1 = weat_test(&stub, &cfg).unwrap();
        let r2 = weat_test(&stub, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(!r1.exhaustive);
        cfg.seed = 43;
        let r3 = weat_test(&stub, &cfg).unwrap();
        assert_eq!(r1.effect_size, r3.effect_size);
    }

    #[test]
    fn config_json_defaults() {
        let cfg: WeatConfig = serde_json::from_str(r#"{"X":["a"],"Y":["b"],"A":["c"],"B":["d"]}"#).unwrap();
        assert_eq!(cfg.permutations, 100_000);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.mode, PermutationMode::Auto);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(16, 8), 12_870);
        assert_eq!(binomial(20, 10), 184_756);
    }
}

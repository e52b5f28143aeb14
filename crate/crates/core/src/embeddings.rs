//! Word-embedding tables in the plain text format used by GloVe and
//! word2vec's text output.
//!
//! Each line holds a word followed by its vector components:
//!
//! ```text
//! word v1 v2 ... vd
//! ```
//!
//! An optional `|V| d` header line (word2vec style) is skipped on read.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Vocabulary-indexed matrix of word vectors. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
}

impl EmbeddingTable {
    /// Build a table from words and a matching `|V| x d` matrix.
    pub fn new(words: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if words.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: words.len(),
                got: matrix.nrows(),
            });
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "word token '{w}' is empty or contains whitespace"
                )));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateWord(w.clone()));
            }
        }
        if let Some((i, _)) = matrix
            .rows()
            .into_iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite(format!("vector of '{}'", words[i])));
        }
        Ok(EmbeddingTable { words, index, matrix })
    }

    /// Convenience constructor from `(word, vector)` rows.
    pub fn from_rows<S: Into<String>>(rows: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |(_, v)| v.len());
        let mut words = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (w, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            words.push(w.into());
            data.extend(v);
        }
        let matrix =
            Array2::from_shape_vec((words.len(), dim), data).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(words, matrix)
    }

    pub fn empty() -> Self {
        EmbeddingTable {
            words: Vec::new(),
            index: HashMap::new(),
            matrix: Array2::zeros((0, 0)),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    /// Row index of `word`, if present.
    pub fn lookup(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row(&self, idx: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(idx)
    }

    /// Vector of `word`, if present.
    pub fn vector(&self, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.lookup(word).map(|i| self.matrix.row(i))
    }

    /// Replace the matrix, keeping the vocabulary.
    pub fn with_matrix(&self, matrix: Array2<f64>) -> Result<Self> {
        Self::new(self.words.clone(), matrix)
    }
}

/// Parse the text embedding format.
pub fn parse_embedding_text<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut words = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut dim: Option<usize> = None;
    let mut first_content = true;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(word) = tokens.next() else {
            continue;
        };
        let rest: Vec<&str> = tokens.collect();

        if first_content {
            first_content = false;
            if rest.len() == 1 && word.parse::<u64>().is_ok() && rest[0].parse::<u64>().is_ok() {
                continue;
            }
        }

        if rest.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("word '{word}' has no vector components"),
            });
        }
        match dim {
            None => dim = Some(rest.len()),
            Some(d) if d != rest.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {d} components, found {}", rest.len()),
                })
            }
            _ => {}
        }
        for tok in &rest {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("cannot parse '{tok}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite component '{tok}'"),
                });
            }
            data.push(v);
        }
        if seen.insert(word.to_string(), lineno).is_some() {
            return Err(Error::DuplicateWord(word.to_string()));
        }
        words.push(word.to_string());
    }

    let dim = dim.unwrap_or(0);
    let matrix = Array2::from_shape_vec((words.len(), dim), data).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    EmbeddingTable::new(words, matrix)
}

/// Serialize a table in the text format.
///
/// `precision` is the number of digits after the decimal point. At the
/// maximum precision of 17 every value is written in its shortest exactly
/// round-tripping decimal form instead, so parsing the output reproduces the
/// table bit for bit.
pub fn write_embedding_text(table: &EmbeddingTable, precision: usize) -> Result<String> {
    if !(1..=17).contains(&precision) {
        return Err(Error::InvalidArgument(format!(
            "precision must be in [1, 17], got {precision}"
        )));
    }
    let mut out = String::new();
    for (word, row) in table.words.iter().zip(table.matrix.rows()) {
        out.push_str(word);
        for v in row {
            if precision == 17 {
                write!(out, " {v:?}").unwrap();
            } else {
                write!(out, " {v:.precision$}").unwrap();
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Scale every row to unit Euclidean norm.
///
/// Rows that are already unit length up to a few ulps are left untouched so
/// that normalizing twice is bitwise identical to normalizing once.
pub fn unit_normalize(table: &EmbeddingTable) -> Result<EmbeddingTable> {
    let mut matrix = table.matrix.clone();
    for (i, mut row) in matrix.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector(table.words[i].clone()));
        }
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            continue;
        }
        row.mapv_inplace(|v| v / norm);
    }
    table.with_matrix(matrix)
}

/// Restrict a table to `words`, in request order. Words absent from the
/// table are returned separately; duplicates in the request are kept once.
pub fn subset<S: AsRef<str>>(table: &EmbeddingTable, words: &[S]) -> (EmbeddingTable, Vec<String>) {
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let mut taken = std::collections::HashSet::new();
    for w in words {
        let w = w.as_ref();
        match table.lookup(w) {
            Some(i) => {
                if taken.insert(i) {
                    kept.push(w.to_string());
                    rows.push(i);
                }
            }
            None => missing.push(w.to_string()),
        }
    }
    let matrix = table.matrix.select(Axis(0), &rows);
    let sub = EmbeddingTable::new(kept, matrix).expect("subset of a valid table is valid");
    (sub, missing)
}

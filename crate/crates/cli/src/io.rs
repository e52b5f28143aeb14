//! File helpers and the CLI error type.

use std::fs;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use kdebias::{parse_embedding_text, unit_normalize, EmbeddingTable, ErrorKind};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: kdebias::Error },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] kdebias::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let kind = match self {
            CliError::File { .. } | CliError::Config(_) => ErrorKind::Config,
            CliError::Input { source, .. } | CliError::Core(source) => source.kind(),
        };
        match kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn file_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn input_err(path: &Path) -> impl FnOnce(kdebias::Error) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(file_err(path))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(file_err(path))
}

/// Load embeddings from a path (`-` for stdin), unit-normalizing unless told not to.
pub fn load_embeddings(path: &Path, normalize: bool) -> CliResult<EmbeddingTable> {
    let table = if path == Path::new("-") {
        parse_embedding_text(io::stdin().lock()).map_err(input_err(path))?
    } else {
        let f = fs::File::open(path).map_err(file_err(path))?;
        parse_embedding_text(BufReader::new(f)).map_err(input_err(path))?
    };
    log::info!(
        "loaded {} words of dimension {} from {}",
        table.len(),
        table.dim(),
        path.display()
    );
    if normalize {
        Ok(unit_normalize(&table).map_err(input_err(path))?)
    } else {
        Ok(table)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| input_err(path)(e.into()))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if path == Path::new("-") {
        print!("{text}");
        return Ok(());
    }
    fs::write(path, text).map_err(file_err(path))
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(kdebias::Error::from)?;
    s.push('\n');
    Ok(s)
}

/// One word per line; blank lines and `#` comments are skipped.
pub fn read_word_list(path: &Path) -> CliResult<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// `results.json` -> `results.csv`.
pub fn csv_sibling(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

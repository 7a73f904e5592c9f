//! Scores JSONL, the hand-off between `score` and `detect`/`eval`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use glimpse::scoring::Label;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aux {
    pub log_likelihood: f64,
    pub mu_total: f64,
    pub sigma2_total: f64,
    pub top_k: usize,
    pub rank_size: usize,
    #[serde(default)]
    pub dataset: String,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub label: Label,
    pub method: String,
    pub estimator: String,
    pub metric: f64,
    pub n_tokens: usize,
    pub aux: Aux,
}

pub fn read_scores(path: &Path) -> CliResult<Vec<ScoreRecord>> {
    let file = File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::io(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Buffered writer to `path`, or stdout.
pub fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_jsonl<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> CliResult<()> {
    for row in rows {
        serde_json::to_writer(&mut *out, row).map_err(|e| CliError::io(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

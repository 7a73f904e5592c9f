//! JSONL passage dumps, one object per line:
//!
//! ```text
//! {"id": .., "label": "human"|"machine"|"unknown", "text"?: .., "tokens"?: [..],
//!  "token_logprobs": [lp | null, ..], "top_logprobs": [[lp, ..] | null, ..],
//!  "true_probs"?: [[p, ..], ..], "meta": {..}}
//! ```
//!
//! Logprobs are natural-log values. `null` entries mark positions the
//! provider did not report; they are skipped and counted. Paths ending in
//! `.gz` are gzip-compressed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use log::warn;
use serde::{Deserialize, Serialize};

use super::{Label, PassageObservation, SourceMeta};
use crate::distribution::{PartialObservation, RankDistribution};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct DumpRecord {
    id: String,
    #[serde(default)]
    label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    token_logprobs: Vec<Option<f64>>,
    top_logprobs: Vec<Option<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    true_probs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    meta: SourceMeta,
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

impl DumpRecord {
    fn from_observation(obs: &PassageObservation) -> Self {
        Self {
            id: obs.id.clone(),
            label: obs.label,
            text: obs.text.clone(),
            tokens: obs.tokens.clone(),
            token_logprobs: obs.positions.iter().map(|o| Some(o.token_prob().ln())).collect(),
            top_logprobs: obs
                .positions
                .iter()
                .map(|o| Some(o.top_probs().iter().map(|p| p.ln()).collect()))
                .collect(),
            true_probs: obs
                .truths
                .as_ref()
                .map(|t| t.iter().map(|d| d.probs().to_vec()).collect()),
            meta: obs.meta.clone(),
        }
    }

    fn into_observation(self, line: usize) -> Result<PassageObservation> {
        let schema = |message: String| Error::Schema { line, message };
        if self.token_logprobs.len() != self.top_logprobs.len() {
            return Err(schema(format!(
                "token_logprobs has {} entries but top_logprobs has {}",
                self.token_logprobs.len(),
                self.top_logprobs.len()
            )));
        }
        let mut positions = Vec::with_capacity(self.token_logprobs.len());
        let mut skipped = 0;
        for (j, (lp, top)) in self.token_logprobs.iter().zip(&self.top_logprobs).enumerate() {
            let (Some(lp), Some(top)) = (lp, top) else {
                skipped += 1;
                continue;
            };
            if top.is_empty() {
                skipped += 1;
                continue;
            }
            if let Some(i) = top.windows(2).position(|w| w[1] > w[0]) {
                return Err(schema(format!(
                    "top_logprobs[{j}] is not sorted descending at entry {}",
                    i + 1
                )));
            }
            let probs = top.iter().map(|x| x.exp()).collect();
            let obs = PartialObservation::new(lp.exp(), probs)
                .map_err(|e| schema(format!("position {j}: {e}")))?;
            positions.push(obs);
        }
        let truths = match self.true_probs {
            None => None,
            Some(rows) => {
                if rows.len() != self.top_logprobs.len() {
                    return Err(schema("true_probs length differs from top_logprobs".into()));
                }
                if skipped > 0 {
                    return Err(schema("true_probs cannot accompany skipped positions".into()));
                }
                let dists = rows
                    .into_iter()
                    .enumerate()
                    .map(|(j, p)| {
                        RankDistribution::new(p, 0)
                            .map_err(|e| schema(format!("true_probs[{j}]: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(dists)
            }
        };
        let mut meta = self.meta;
        meta.skipped_positions += skipped;
        let obs = PassageObservation {
            id: self.id,
            label: self.label,
            text: self.text,
            tokens: self.tokens,
            positions,
            truths,
            meta,
        };
        obs.validate().map_err(|e| schema(e.to_string()))?;
        Ok(obs)
    }
}

/// Streaming reader yielding one passage per non-blank line.
pub struct DumpReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line: 0,
        }
    }

    /// 1-based number of the most recently read line.
    pub fn line(&self) -> usize {
        self.line
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<PassageObservation>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line += 1;
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(e.into())),
            };
            if text.trim().is_empty() {
                continue;
            }
            let line = self.line;
            return Some(
                serde_json::from_str::<DumpRecord>(&text)
                    .map_err(|e| Error::Schema {
                        line,
                        message: e.to_string(),
                    })
                    .and_then(|r| r.into_observation(line)),
            );
        }
    }
}

pub fn open_dump(path: impl AsRef<Path>) -> Result<DumpReader<Box<dyn BufRead>>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let reader: Box<dyn BufRead> = if is_gz(path) {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    Ok(DumpReader::new(reader))
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<Vec<PassageObservation>> {
    open_dump(path)?.collect()
}

#[derive(Debug, Default)]
pub struct Salvaged {
    pub passages: Vec<PassageObservation>,
    pub warnings: Vec<String>,
}

/// Read up to the first unreadable line and keep what came before it.
pub fn read_dump_salvage(path: impl AsRef<Path>) -> Result<Salvaged> {
    let mut reader = open_dump(&path)?;
    let mut out = Salvaged::default();
    while let Some(item) = reader.next() {
        match item {
            Ok(obs) => out.passages.push(obs),
            Err(e) => {
                let msg = format!(
                    "{}: stopped at line {}: {e}; kept {} passages",
                    path.as_ref().display(),
                    reader.line(),
                    out.passages.len()
                );
                warn!("{msg}");
                out.warnings.push(msg);
                break;
            }
        }
    }
    Ok(out)
}

enum Sink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
    Other(Box<dyn Write>),
}

impl Sink {
    fn writer(&mut self) -> &mut dyn Write {
        match self {
            Sink::Plain(w) => w,
            Sink::Gzip(w) => w,
            Sink::Other(w) => w,
        }
    }
}

pub struct DumpWriter {
    sink: Sink,
}

impl DumpWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = BufWriter::new(File::create(path)?);
        let sink = if is_gz(path) {
            Sink::Gzip(GzEncoder::new(file, Compression::default()))
        } else {
            Sink::Plain(file)
        };
        Ok(Self { sink })
    }

    pub fn from_writer(w: impl Write + 'static) -> Self {
        Self {
            sink: Sink::Other(Box::new(w)),
        }
    }

    pub fn write(&mut self, obs: &PassageObservation) -> Result<()> {
        let record = DumpRecord::from_observation(obs);
        let w = self.sink.writer();
        serde_json::to_writer(&mut *w, &record).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        match self.sink {
            Sink::Plain(mut w) => w.flush()?,
            Sink::Gzip(w) => w.finish()?.flush()?,
            Sink::Other(mut w) => w.flush()?,
        }
        Ok(())
    }
}

pub fn write_dump<'a>(
    observations: impl IntoIterator<Item = &'a PassageObservation>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = DumpWriter::create(path)?;
    for obs in observations {
        w.write(obs)?;
    }
    w.finish()
}

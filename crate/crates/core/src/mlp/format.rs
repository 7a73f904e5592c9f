//! Binary model file: magic `GLMLP001`, `K, M, H` as u32 LE, then
//! `W1, b1, W2, b2` as f64 LE, then a u32-length-prefixed JSON metadata blob.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{MlpModel, ModelMeta, MODEL_VERSION};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GLMLP001";

pub(crate) fn encode(model: &MlpModel) -> Vec<u8> {
    let params = model.parameters();
    let meta = serde_json::to_vec(&model.meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(8 + 12 + 8 * params.len() + 4 + meta.len());
    out.extend_from_slice(MAGIC);
    for dim in [model.k(), model.m(), model.hidden()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for p in &params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::CorruptFile(format!(
                "model file truncated while reading {what}"
            )));
        }
        let slice = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<MlpModel> {
    let mut cur = Cursor { bytes, at: 0 };
    let magic = cur.take(8, "magic")?;
    if magic != MAGIC {
        return Err(Error::VersionMismatch {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let (k, m, hidden) = (cur.u32("K")?, cur.u32("M")?, cur.u32("H")?);
    if k == 0 || hidden == 0 || m <= k {
        return Err(Error::CorruptFile(format!(
            "invalid model shape K={k}, M={m}, H={hidden}"
        )));
    }
    let count = hidden * k + hidden + (m - k) * hidden + (m - k);
    let raw = cur.take(8 * count, "weights")?;
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::CorruptFile("model contains non-finite weights".into()));
    }
    let meta_len = cur.u32("metadata length")?;
    let meta_bytes = cur.take(meta_len, "metadata")?;
    if cur.at != bytes.len() {
        return Err(Error::CorruptFile("trailing bytes after metadata".into()));
    }
    let meta: ModelMeta = serde_json::from_slice(meta_bytes)
        .map_err(|e| Error::CorruptFile(format!("metadata: {e}")))?;
    if meta.version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_VERSION.to_string(),
            found: meta.version.to_string(),
        });
    }
    MlpModel::from_raw(k, m, hidden, &params, meta)
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode(model))?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode(&bytes)
}

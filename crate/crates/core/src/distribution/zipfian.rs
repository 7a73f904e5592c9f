//! Zipfian tail completion via a precomputed sum table.
//!
//! The tail is `p(k) = p_K * (beta / (k - K + beta))^alpha`. Mass conservation
//! requires `T[alpha, beta] = sum_{j=1}^{M-K} (beta / (j + beta))^alpha` to equal
//! `p_rest / p_K`; with two unknowns the pair is chosen by minimizing
//!
//! ```text
//! Loss(alpha, beta) = (T[alpha, beta] - p_rest / p_K)^2
//!                   + 1.0 * (alpha - 1)^2 + 0.001 * (beta - 2.7)^2
//! ```
//!
//! over a fixed grid: `alpha = 0.1, 0.2, ..., 9.9` and `beta = 0.1, 0.3, ..., 19.9`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_rank_size, estimate_naive, PartialObservation, RankDistribution, MASS_EPSILON};
use crate::error::{Error, Result};

pub const ALPHA_STEPS: usize = 99;
pub const BETA_STEPS: usize = 100;

const TYPICAL_ALPHA: f64 = 1.0;
const TYPICAL_BETA: f64 = 2.7;
const ALPHA_PENALTY: f64 = 1.0;
const BETA_PENALTY: f64 = 0.001;

const TABLE_MAGIC: &[u8; 8] = b"GLSUMT01";

/// Grid value of `alpha` at row `i`.
pub fn grid_alpha(i: usize) -> f64 {
    (i + 1) as f64 / 10.0
}

/// Grid value of `beta` at column `j`.
pub fn grid_beta(j: usize) -> f64 {
    (2 * j + 1) as f64 / 10.0
}

pub fn zipfian_loss(sum: f64, ratio: f64, alpha: f64, beta: f64) -> f64 {
    let residual = sum - ratio;
    residual * residual
        + ALPHA_PENALTY * (alpha - TYPICAL_ALPHA).powi(2)
        + BETA_PENALTY * (beta - TYPICAL_BETA).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfianParams {
    pub alpha: f64,
    pub beta: f64,
    pub loss: f64,
}

/// Precomputed `T[alpha, beta]` for one `(M, K)` pair, alpha-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTable {
    rank_size: usize,
    k: usize,
    values: Vec<f64>,
}

/// `sum_{j=1}^{n} (beta / (j + beta))^alpha`, one entry of the sum table.
pub fn tail_sum(alpha: f64, beta: f64, n: usize) -> f64 {
    (1..=n).map(|t| (beta / (t as f64 + beta)).powf(alpha)).sum()
}

pub fn build_sum_table(rank_size: usize, k: usize) -> Result<SumTable> {
    if k == 0 || rank_size <= k {
        return Err(Error::config(format!(
            "sum table needs M > K >= 1, got M={rank_size}, K={k}"
        )));
    }
    let n = rank_size - k;
    let mut values = Vec::with_capacity(ALPHA_STEPS * BETA_STEPS);
    for i in 0..ALPHA_STEPS {
        let alpha = grid_alpha(i);
        for j in 0..BETA_STEPS {
            let beta = grid_beta(j);
            values.push(tail_sum(alpha, beta, n));
        }
    }
    Ok(SumTable {
        rank_size,
        k,
        values,
    })
}

impl SumTable {
    pub fn rank_size(&self) -> usize {
        self.rank_size
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, alpha_idx: usize, beta_idx: usize) -> f64 {
        self.values[alpha_idx * BETA_STEPS + beta_idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid point minimizing the penalized loss for `ratio = p_rest / p_K`.
    /// Ties resolve to the smallest alpha, then the smallest beta.
    pub fn search(&self, ratio: f64) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..ALPHA_STEPS {
            let alpha = grid_alpha(i);
            for j in 0..BETA_STEPS {
                let loss = zipfian_loss(self.get(i, j), ratio, alpha, grid_beta(j));
                if loss < best.2 {
                    best = (i, j, loss);
                }
            }
        }
        best
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.values.len());
        out.extend_from_slice(TABLE_MAGIC);
        for dim in [self.rank_size, self.k, ALPHA_STEPS, BETA_STEPS] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::CorruptFile("sum table shorter than its magic".into()));
        }
        if &bytes[..8] != TABLE_MAGIC {
            return Err(Error::VersionMismatch {
                expected: String::from_utf8_lossy(TABLE_MAGIC).into_owned(),
                found: String::from_utf8_lossy(&bytes[..8]).into_owned(),
            });
        }
        if bytes.len() < 24 {
            return Err(Error::CorruptFile("sum table header truncated".into()));
        }
        let dim = |i: usize| {
            let at = 8 + 4 * i;
            u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
        };
        let (rank_size, k, rows, cols) = (dim(0), dim(1), dim(2), dim(3));
        if rows != ALPHA_STEPS || cols != BETA_STEPS {
            return Err(Error::CorruptFile(format!(
                "sum table grid {rows}x{cols}, expected {ALPHA_STEPS}x{BETA_STEPS}"
            )));
        }
        if k == 0 || rank_size <= k {
            return Err(Error::CorruptFile(format!("invalid table shape M={rank_size}, K={k}")));
        }
        let body = &bytes[24..];
        if body.len() != 8 * rows * cols {
            return Err(Error::CorruptFile(format!(
                "sum table body has {} bytes, expected {}",
                body.len(),
                8 * rows * cols
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            rank_size,
            k,
            values,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

pub fn estimate_zipfian(
    obs: &PartialObservation,
    rank_size: usize,
    table: &SumTable,
) -> Result<(RankDistribution, Option<ZipfianParams>)> {
    estimate_zipfian_with(obs, rank_size, table, true)
}

/// Zipfian completion. With `rescale` the tail is multiplied by
/// `p_rest / (p_K * T[alpha, beta])` so the total is exactly one even when
/// the grid optimum leaves a residual.
pub fn estimate_zipfian_with(
    obs: &PartialObservation,
    rank_size: usize,
    table: &SumTable,
    rescale: bool,
) -> Result<(RankDistribution, Option<ZipfianParams>)> {
    check_rank_size(obs, rank_size)?;
    let p_rest = obs.p_rest();
    if p_rest <= MASS_EPSILON || rank_size == obs.k() {
        return Ok((estimate_naive(obs, rank_size)?, None));
    }
    if table.rank_size != rank_size || table.k != obs.k() {
        return Err(Error::config(format!(
            "sum table built for (M={}, K={}), observation needs (M={rank_size}, K={})",
            table.rank_size,
            table.k,
            obs.k()
        )));
    }
    let p_k = obs.p_k();
    let n = rank_size - obs.k();
    let (i, j, loss) = table.search(p_rest / p_k);
    let (alpha, beta) = (grid_alpha(i), grid_beta(j));
    let sum = table.get(i, j);
    let shape = |t: usize| (beta / (t as f64 + beta)).powf(alpha);
    let mut probs = Vec::with_capacity(rank_size);
    probs.extend_from_slice(obs.top_probs());
    let scale = p_rest / (p_k * sum);
    if !rescale {
        probs.extend((1..=n).map(|t| p_k * shape(t)));
    } else if scale * shape(1) <= 1.0 || p_rest >= p_k * n as f64 {
        probs.extend((1..=n).map(|t| scale * p_k * shape(t)));
    } else {
        // Scaling up would lift rank K+1 above p_K. Blend toward the flat
        // tail instead: still sums to p_rest and stays non-increasing.
        let theta = (p_rest - p_k * sum) / (p_k * (n as f64 - sum));
        probs.extend((1..=n).map(|t| p_k * ((1.0 - theta) * shape(t) + theta)));
    }
    Ok((
        RankDistribution::from_parts(probs, obs.k(), None),
        Some(ZipfianParams { alpha, beta, loss }),
    ))
}

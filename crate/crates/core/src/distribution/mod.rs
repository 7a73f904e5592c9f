//! Completion of partial top-K observations into rank-indexed distributions.
//!
//! Every estimator copies the observed prefix `p_1..p_K` verbatim and fills
//! ranks `K+1..M` with the leftover mass `p_rest = 1 - sum(p_k)`:
//!
//! * [`estimate_naive`] assigns nothing beyond rank K.
//! * [`estimate_geometric`] uses a geometric tail `p_K * lambda^(k-K)`.
//! * [`estimate_zipfian`] uses a shifted power law `p_K * (beta / (k-K+beta))^alpha`.
//! * [`estimate_mlp`] scales a learned softmax tail by `p_rest`.

mod estimator;
mod geometric;
mod kl;
mod zipfian;

pub use estimator::{Estimator, EstimatorKind, MlpBank, ZipfianTables};
pub use geometric::{
    estimate_geometric, fit_geometric, geometric_series_sum, solve_geometric_decay,
    GeometricParams, GeometricSolver,
};
pub use kl::{kl_divergence, kl_divergence_smoothed};
pub use zipfian::{
    build_sum_table, estimate_zipfian, estimate_zipfian_with, grid_alpha, grid_beta, tail_sum,
    zipfian_loss, SumTable, ZipfianParams, ALPHA_STEPS, BETA_STEPS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::MlpModel;

/// Slack tolerated on probability sums coming from rounded API logprobs.
pub const NUMERIC_SLACK: f64 = 1e-6;

/// Leftover mass at or below this is treated as zero and the tail is left empty.
pub const MASS_EPSILON: f64 = 1e-12;

/// Tolerance used when counting monotonic-decrease violations.
pub const MONOTONE_TOLERANCE: f64 = 1e-9;

/// The API-visible slice of one next-token distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialObservation {
    token_prob: f64,
    top_probs: Vec<f64>,
}

impl PartialObservation {
    pub fn new(token_prob: f64, top_probs: Vec<f64>) -> Result<Self> {
        if top_probs.is_empty() {
            return Err(Error::InvalidObservation("top_probs is empty".into()));
        }
        for (i, &p) in top_probs.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0 + NUMERIC_SLACK) {
                return Err(Error::InvalidObservation(format!(
                    "top_probs[{i}] = {p} is outside (0, 1]"
                )));
            }
        }
        if let Some(i) = top_probs.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidObservation(format!(
                "top_probs not non-increasing at rank {}: {} < {}",
                i + 2,
                top_probs[i],
                top_probs[i + 1]
            )));
        }
        let total: f64 = top_probs.iter().sum();
        if total > 1.0 + NUMERIC_SLACK {
            return Err(Error::InvalidObservation(format!(
                "top_probs sum to {total} > 1"
            )));
        }
        if !(token_prob > 0.0 && token_prob <= 1.0 + NUMERIC_SLACK) {
            return Err(Error::InvalidObservation(format!(
                "token_prob = {token_prob} is outside (0, 1]"
            )));
        }
        if token_prob > top_probs[0] + NUMERIC_SLACK {
            return Err(Error::InvalidObservation(format!(
                "token_prob {token_prob} exceeds top-1 probability {}",
                top_probs[0]
            )));
        }
        Ok(Self {
            token_prob,
            top_probs,
        })
    }

    pub fn token_prob(&self) -> f64 {
        self.token_prob
    }

    pub fn top_probs(&self) -> &[f64] {
        &self.top_probs
    }

    pub fn k(&self) -> usize {
        self.top_probs.len()
    }

    /// Probability of the K-th ranked token.
    pub fn p_k(&self) -> f64 {
        self.top_probs[self.top_probs.len() - 1]
    }

    /// Mass not covered by the observed prefix. May be slightly negative
    /// when rounded API values overshoot 1.
    pub fn p_rest(&self) -> f64 {
        1.0 - self.top_probs.iter().sum::<f64>()
    }

    /// Keep only the `k` most probable entries.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(Error::config(format!(
                "cannot truncate a top-{} observation to top-{k}",
                self.k()
            )));
        }
        Ok(Self {
            token_prob: self.token_prob,
            top_probs: self.top_probs[..k].to_vec(),
        })
    }
}

/// A completed probability vector over ranks `1..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDistribution {
    probs: Vec<f64>,
    k_observed: usize,
    deficiency: Option<f64>,
}

impl RankDistribution {
    /// Validate a fully specified distribution (e.g. a ground-truth one).
    pub fn new(probs: Vec<f64>, k_observed: usize) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidObservation("distribution is empty".into()));
        }
        if k_observed > probs.len() {
            return Err(Error::config("k_observed exceeds distribution length"));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidObservation(format!(
                "distribution entry {p} is negative or not finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NUMERIC_SLACK {
            return Err(Error::InvalidObservation(format!(
                "distribution sums to {total}, expected 1"
            )));
        }
        Ok(Self {
            probs,
            k_observed,
            deficiency: None,
        })
    }

    pub(crate) fn from_parts(probs: Vec<f64>, k_observed: usize, deficiency: Option<f64>) -> Self {
        Self {
            probs,
            k_observed,
            deficiency,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Rank-list size M.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn k_observed(&self) -> usize {
        self.k_observed
    }

    /// Missing mass when the total-probability constraint was waived
    /// (Naive fill or a degenerate-mass fallback).
    pub fn deficiency(&self) -> Option<f64> {
        self.deficiency
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Number of ranks where `p(k+1) > p(k) + MONOTONE_TOLERANCE`.
    pub fn monotone_violations(&self) -> usize {
        self.probs
            .windows(2)
            .filter(|w| w[1] > w[0] + MONOTONE_TOLERANCE)
            .count()
    }

    /// Top-`k` partial view of this distribution, paired with `token_prob`.
    pub fn observe(&self, k: usize, token_prob: f64) -> Result<PartialObservation> {
        if k == 0 || k > self.len() {
            return Err(Error::config(format!(
                "top-k {k} out of range for rank-list size {}",
                self.len()
            )));
        }
        PartialObservation::new(token_prob, self.probs[..k].to_vec())
    }
}

fn check_rank_size(obs: &PartialObservation, rank_size: usize) -> Result<()> {
    if obs.k() > rank_size {
        return Err(Error::config(format!(
            "top-k {} exceeds rank-list size {rank_size}",
            obs.k()
        )));
    }
    Ok(())
}

/// Zero-fill baseline: ranks beyond K get no mass.
///
/// The prefix is renormalized only when it already sums above one, otherwise
/// the missing mass is reported through [`RankDistribution::deficiency`].
pub fn estimate_naive(obs: &PartialObservation, rank_size: usize) -> Result<RankDistribution> {
    check_rank_size(obs, rank_size)?;
    let mut probs = vec![0.0; rank_size];
    probs[..obs.k()].copy_from_slice(obs.top_probs());
    let total: f64 = obs.top_probs().iter().sum();
    let deficiency = if total > 1.0 {
        probs[..obs.k()].iter_mut().for_each(|p| *p /= total);
        0.0
    } else {
        1.0 - total
    };
    Ok(RankDistribution::from_parts(
        probs,
        obs.k(),
        Some(deficiency),
    ))
}

/// Learned tail: `p(k) = p_rest * p_mlp(k - K)` beyond the observed prefix.
///
/// Monotonic decrease is not enforced on the tail; see
/// [`RankDistribution::monotone_violations`].
pub fn estimate_mlp(
    obs: &PartialObservation,
    rank_size: usize,
    model: &MlpModel,
) -> Result<RankDistribution> {
    check_rank_size(obs, rank_size)?;
    if model.k() != obs.k() || model.m() != rank_size {
        return Err(Error::config(format!(
            "model shape (K={}, M={}) does not match observation (K={}, M={rank_size})",
            model.k(),
            model.m(),
            obs.k()
        )));
    }
    let p_rest = obs.p_rest();
    if p_rest <= MASS_EPSILON {
        return estimate_naive(obs, rank_size);
    }
    let input: Vec<f64> = obs.top_probs().iter().map(|p| p.ln()).collect();
    let tail = model.forward(&input)?;
    let mut probs = Vec::with_capacity(rank_size);
    probs.extend_from_slice(obs.top_probs());
    probs.extend(tail.iter().map(|q| p_rest * q));
    Ok(RankDistribution::from_parts(probs, obs.k(), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn obs(top: &[f64]) -> PartialObservation {
        PartialObservation::new(top[0], top.to_vec()).unwrap()
    }

    #[test]
    fn observation_rejects_unsorted_prefix() {
        let err = PartialObservation::new(0.2, vec![0.2, 0.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidObservation(_)));
    }

    #[test]
    fn observation_rejects_overfull_prefix() {
        assert!(PartialObservation::new(0.6, vec![0.6, 0.5]).is_err());
        // rounding slack is tolerated
        assert!(PartialObservation::new(0.6, vec![0.6, 0.4000005]).is_ok());
    }

    #[test]
    fn observation_rejects_token_above_top1() {
        assert!(PartialObservation::new(0.7, vec![0.5, 0.2]).is_err());
        assert!(PartialObservation::new(0.0, vec![0.5, 0.2]).is_err());
    }

    #[test]
    fn naive_prefix_summing_to_one() {
        let d = estimate_naive(&obs(&[0.5, 0.3, 0.2]), 10).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.3, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.len(), 10);
    }

    #[test]
    fn naive_point_mass() {
        let d = estimate_naive(&obs(&[1.0]), 5).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.deficiency(), Some(0.0));
    }

    #[test]
    fn naive_reports_deficiency() {
        let d = estimate_naive(&obs(&[0.4, 0.2]), 4).unwrap();
        assert_eq!(d.probs(), &[0.4, 0.2, 0.0, 0.0]);
        assert_relative_eq!(d.deficiency().unwrap(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn naive_renormalizes_overshoot() {
        let d = estimate_naive(&obs(&[0.6, 0.4000005]), 3).unwrap();
        assert_relative_eq!(d.total(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn naive_rejects_k_above_m() {
        let err = estimate_naive(&obs(&[0.5, 0.3, 0.2]), 2).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn monotone_violations_are_counted() {
        let d = RankDistribution::from_parts(vec![0.5, 0.1, 0.3, 0.1], 1, None);
        assert_eq!(d.monotone_violations(), 1);
    }
}

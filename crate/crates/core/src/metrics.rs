//! Zero-shot detection scores computed from completed distributions.
//!
//! All metrics are oriented so that a higher value means "more likely
//! machine-generated"; Rank and LogRank are therefore negated means.
//! Curvature is standardized log-likelihood:
//! `(sum_j ln p(x_j) - sum_j mu_j) / sqrt(sum_j sigma2_j)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::{Estimator, PartialObservation, RankDistribution};
use crate::error::{Error, Result};

/// Expected log-probability and its variance under one distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenMoments {
    pub mu: f64,
    pub sigma2: f64,
}

/// Moments before the variance is clamped at zero.
pub fn token_moments_unclamped(dist: &RankDistribution) -> TokenMoments {
    let (mut mu, mut second) = (0.0, 0.0);
    for &p in dist.probs() {
        if p > 0.0 {
            let lp = p.ln();
            mu += p * lp;
            second += p * lp * lp;
        }
    }
    TokenMoments {
        mu,
        sigma2: second - mu * mu,
    }
}

/// `mu = sum p ln p` (negative entropy), `sigma2 = sum p ln^2 p - mu^2`.
pub fn token_moments(dist: &RankDistribution) -> TokenMoments {
    let raw = token_moments_unclamped(dist);
    TokenMoments {
        mu: raw.mu,
        sigma2: raw.sigma2.max(0.0),
    }
}

/// Rank whose probability is closest to `token_prob`; ties go to the lower rank.
pub fn rank_of_token(dist: &RankDistribution, token_prob: f64) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, &p) in dist.probs().iter().enumerate() {
        let gap = (p - token_prob).abs();
        if gap < best.1 {
            best = (i, gap);
        }
    }
    best.0 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Curvature,
    Entropy,
    Rank,
    LogRank,
    Likelihood,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Curvature,
        Method::Entropy,
        Method::Rank,
        Method::LogRank,
        Method::Likelihood,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Curvature => "curvature",
            Method::Entropy => "entropy",
            Method::Rank => "rank",
            Method::LogRank => "logrank",
            Method::Likelihood => "likelihood",
        }
    }

    pub fn needs_estimator(self) -> bool {
        self != Method::Likelihood
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageScore {
    pub metric: f64,
    pub log_likelihood: f64,
    pub mu_total: f64,
    pub sigma2_total: f64,
    pub n_tokens: usize,
}

struct Accumulated {
    log_likelihood: f64,
    mu_total: f64,
    sigma2_total: f64,
    rank_sum: f64,
    log_rank_sum: f64,
    n: usize,
}

fn accumulate(
    positions: &[PartialObservation],
    estimator: &Estimator,
    rank_size: usize,
) -> Result<Accumulated> {
    if positions.is_empty() {
        return Err(Error::EmptyPassage);
    }
    let mut acc = Accumulated {
        log_likelihood: 0.0,
        mu_total: 0.0,
        sigma2_total: 0.0,
        rank_sum: 0.0,
        log_rank_sum: 0.0,
        n: positions.len(),
    };
    for obs in positions {
        let dist = estimator.estimate(obs, rank_size)?;
        let moments = token_moments(&dist);
        let rank = rank_of_token(&dist, obs.token_prob()) as f64;
        acc.log_likelihood += obs.token_prob().ln();
        acc.mu_total += moments.mu;
        acc.sigma2_total += moments.sigma2;
        acc.rank_sum += rank;
        acc.log_rank_sum += rank.ln();
    }
    Ok(acc)
}

impl Accumulated {
    fn score(&self, metric: f64) -> PassageScore {
        PassageScore {
            metric,
            log_likelihood: self.log_likelihood,
            mu_total: self.mu_total,
            sigma2_total: self.sigma2_total,
            n_tokens: self.n,
        }
    }
}

pub fn curvature_score(
    positions: &[PartialObservation],
    estimator: &Estimator,
    rank_size: usize,
) -> Result<PassageScore> {
    let acc = accumulate(positions, estimator, rank_size)?;
    if !(acc.sigma2_total > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(acc.score((acc.log_likelihood - acc.mu_total) / acc.sigma2_total.sqrt()))
}

/// Mean token entropy of the completed distributions.
pub fn entropy_score(
    positions: &[PartialObservation],
    estimator: &Estimator,
    rank_size: usize,
) -> Result<PassageScore> {
    let acc = accumulate(positions, estimator, rank_size)?;
    Ok(acc.score(-acc.mu_total / acc.n as f64))
}

pub fn rank_score(
    positions: &[PartialObservation],
    estimator: &Estimator,
    rank_size: usize,
) -> Result<PassageScore> {
    let acc = accumulate(positions, estimator, rank_size)?;
    Ok(acc.score(-acc.rank_sum / acc.n as f64))
}

pub fn logrank_score(
    positions: &[PartialObservation],
    estimator: &Estimator,
    rank_size: usize,
) -> Result<PassageScore> {
    let acc = accumulate(positions, estimator, rank_size)?;
    Ok(acc.score(-acc.log_rank_sum / acc.n as f64))
}

/// Mean token log-probability; needs no estimator.
pub fn likelihood_score(positions: &[PartialObservation]) -> Result<PassageScore> {
    if positions.is_empty() {
        return Err(Error::EmptyPassage);
    }
    let log_likelihood: f64 = positions.iter().map(|o| o.token_prob().ln()).sum();
    Ok(PassageScore {
        metric: log_likelihood / positions.len() as f64,
        log_likelihood,
        mu_total: 0.0,
        sigma2_total: 0.0,
        n_tokens: positions.len(),
    })
}

pub fn score(
    method: Method,
    positions: &[PartialObservation],
    estimator: &Estimator,
    rank_size: usize,
) -> Result<PassageScore> {
    match method {
        Method::Curvature => curvature_score(positions, estimator, rank_size),
        Method::Entropy => entropy_score(positions, estimator, rank_size),
        Method::Rank => rank_score(positions, estimator, rank_size),
        Method::LogRank => logrank_score(positions, estimator, rank_size),
        Method::Likelihood => likelihood_score(positions),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dist(p: &[f64]) -> RankDistribution {
        RankDistribution::new(p.to_vec(), p.len()).unwrap()
    }

    fn full(obs_probs: &[f64], token_prob: f64) -> PartialObservation {
        PartialObservation::new(token_prob, obs_probs.to_vec()).unwrap()
    }

    #[test]
    fn moments_of_simple_distributions() {
        let m = token_moments(&dist(&[1.0]));
        assert_eq!((m.mu, m.sigma2), (0.0, 0.0));

        let m = token_moments(&dist(&[0.25; 4]));
        assert_relative_eq!(m.mu, 0.25f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(m.mu, -1.3862943611, epsilon = 1e-9);
        assert!(m.sigma2.abs() < 1e-15);

        let m = token_moments(&dist(&[0.5, 0.5, 0.0, 0.0]));
        assert_relative_eq!(m.mu, -0.6931471806, epsilon = 1e-9);
        assert!(m.sigma2.abs() < 1e-15);

        let m = token_moments(&dist(&[0.75, 0.25]));
        let mu = 0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln();
        let second = 0.75 * 0.75f64.ln().powi(2) + 0.25 * 0.25f64.ln().powi(2);
        assert_relative_eq!(m.mu, mu, epsilon = 1e-15);
        assert_relative_eq!(m.mu, -0.5623351446, epsilon = 1e-9);
        assert_relative_eq!(m.sigma2, second - mu * mu, epsilon = 1e-15);
        assert_relative_eq!(m.sigma2, 0.2263029302, epsilon = 1e-9);
    }

    #[test]
    fn rank_lookup() {
        let d = RankDistribution::new(vec![0.5, 0.3, 0.1, 0.1], 4).unwrap();
        assert_eq!(rank_of_token(&d, 0.5), 1);
        assert_eq!(rank_of_token(&d, 0.15), 3);
        let d = RankDistribution::new(vec![0.4, 0.2, 0.2, 0.2], 4).unwrap();
        assert_eq!(rank_of_token(&d, 0.2), 2);
    }

    #[test]
    fn token_at_expected_log_prob_gives_zero_curvature() {
        let a = [0.75, 0.25];
        let p = 0.75f64;
        let target_mu = 0.75 * p.ln() + 0.25 * 0.25f64.ln();
        let token = target_mu.exp();
        let positions = vec![full(&a, token), full(&a, token)];
        let s = curvature_score(&positions, &Estimator::Naive, 2).unwrap();
        assert!(s.metric.abs() < 1e-12);
    }

    #[test]
    fn top_tokens_on_sharp_distributions_look_machine_made() {
        let sharp = [0.9, 0.05, 0.03, 0.02];
        let positions = vec![full(&sharp, 0.9); 20];
        let s = curvature_score(&positions, &Estimator::Naive, 4).unwrap();
        assert!(s.metric > 1.0);
    }

    #[test]
    fn deterministic_positions_have_degenerate_variance() {
        let positions = vec![full(&[1.0], 1.0); 3];
        assert!(matches!(
            curvature_score(&positions, &Estimator::Geometric, 10),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn entropy_values() {
        let s = entropy_score(&[full(&[1.0], 1.0)], &Estimator::Naive, 1).unwrap();
        assert_eq!(s.metric, 0.0);
        let uniform = vec![0.01; 100];
        let s = entropy_score(&[full(&uniform, 0.01)], &Estimator::Naive, 100).unwrap();
        assert_relative_eq!(s.metric, 100f64.ln(), epsilon = 1e-12);
        let s = entropy_score(
            &[full(&[1.0], 1.0), full(&[0.25; 4], 0.25)],
            &Estimator::Naive,
            4,
        )
        .unwrap();
        assert_relative_eq!(s.metric, (0.0 + 4f64.ln()) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_metrics() {
        let d = [0.4, 0.3, 0.2, 0.1];
        // token probabilities at ranks 1, 2 and 4
        let positions = vec![full(&d, 0.4), full(&d, 0.3), full(&d, 0.1)];
        let r = rank_score(&positions, &Estimator::Naive, 4).unwrap();
        assert_relative_eq!(r.metric, -7.0 / 3.0, epsilon = 1e-15);
        let lr = logrank_score(&positions, &Estimator::Naive, 4).unwrap();
        assert_relative_eq!(lr.metric, -(2f64.ln() + 4f64.ln()) / 3.0, epsilon = 1e-15);
        assert_relative_eq!(lr.metric, -0.6931471806, epsilon = 1e-9);

        let top = vec![full(&d, 0.4); 5];
        assert_eq!(rank_score(&top, &Estimator::Naive, 4).unwrap().metric, -1.0);
        assert_eq!(logrank_score(&top, &Estimator::Naive, 4).unwrap().metric, 0.0);
    }

    #[test]
    fn single_token_at_last_rank() {
        let probs: Vec<f64> = (0..100).map(|i| 2.0 * (100 - i) as f64 / 10100.0).collect();
        let token = probs[99];
        let s = rank_score(&[full(&probs, token)], &Estimator::Naive, 100).unwrap();
        assert_eq!(s.metric, -100.0);
    }

    #[test]
    fn likelihood_values() {
        assert_eq!(likelihood_score(&[full(&[1.0], 1.0)]).unwrap().metric, 0.0);
        let positions = vec![full(&[0.5, 0.5], 0.5), full(&[0.5, 0.25], 0.25)];
        let s = likelihood_score(&positions).unwrap();
        assert_relative_eq!(s.metric, (0.5f64.ln() + 0.25f64.ln()) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(s.metric, -1.0397207708, epsilon = 1e-9);
        let doubled: Vec<_> = positions.iter().chain(&positions).cloned().collect();
        assert_relative_eq!(likelihood_score(&doubled).unwrap().metric, s.metric, epsilon = 1e-15);
    }

    #[test]
    fn empty_passage() {
        assert!(matches!(likelihood_score(&[]), Err(Error::EmptyPassage)));
        assert!(matches!(
            rank_score(&[], &Estimator::Naive, 10),
            Err(Error::EmptyPassage)
        ));
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
    }
}

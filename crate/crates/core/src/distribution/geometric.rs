//! Geometric tail completion.
//!
//! The tail `p(k) = p_K * lambda^(k-K)` for `k in K+1..=M` must carry the
//! leftover mass, i.e. `p_K * S(lambda) = p_rest` with
//! `S(lambda) = sum_{j=1}^{M-K} lambda^j = (lambda - lambda^(M-K+1)) / (1 - lambda)`.
//!
//! The solver starts from `lambda_0 = p_rest / (p_K + p_rest)`, the solution
//! when `lambda^(M-K+1)` vanishes, and otherwise applies the fixed-point update
//! `lambda <- 1 - (lambda - lambda^(M-K+1)) * p_K / p_rest`. That update only
//! contracts for `lambda > 1/2`, so a non-contracting or stalled run hands over
//! to a bracketed Newton iteration on `S(lambda) - p_rest / p_K`.

use serde::{Deserialize, Serialize};

use super::{check_rank_size, estimate_naive, PartialObservation, RankDistribution, MASS_EPSILON};
use crate::error::{Error, Result};

/// Relative residual `|p_K * S(lambda) - p_rest| / p_rest` accepted as solved.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    pub decay: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GeometricSolver {
    pub max_iterations: usize,
    /// Step size below which the fixed-point iteration is considered settled.
    pub step_tolerance: f64,
    /// `lambda` is kept inside `[clamp, 1 - clamp]` on every update.
    pub clamp: f64,
}

impl Default for GeometricSolver {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            step_tolerance: 1e-12,
            clamp: 1e-9,
        }
    }
}

/// `sum_{j=1}^{n} lambda^j` for `lambda` in `(0, 1)`.
pub fn geometric_series_sum(lambda: f64, n: usize) -> f64 {
    let ln = lambda.ln();
    // lambda * (1 - lambda^n) / (1 - lambda), with expm1 keeping 1 - lambda^n exact-ish
    lambda * -(n as f64 * ln).exp_m1() / (1.0 - lambda)
}

fn series_derivative(lambda: f64, n: usize) -> f64 {
    let nf = n as f64;
    let pow_n = (nf * lambda.ln()).exp();
    let one_minus = 1.0 - lambda;
    (1.0 - (nf + 1.0) * pow_n + nf * pow_n * lambda) / (one_minus * one_minus)
}

impl GeometricSolver {
    pub fn solve(&self, p_rest: f64, p_k: f64, rank_size: usize, k: usize) -> Result<GeometricParams> {
        if !(p_rest > 0.0 && p_rest.is_finite()) {
            return Err(Error::DegenerateMass(p_rest));
        }
        if !(p_k > 0.0 && p_k.is_finite()) {
            return Err(Error::InvalidObservation(format!("p_K = {p_k} must be positive")));
        }
        if rank_size <= k {
            return Err(Error::config(format!(
                "rank-list size {rank_size} must exceed top-k {k}"
            )));
        }
        let n = rank_size - k;
        let ratio = p_rest / p_k;
        let solved = |lambda: f64| {
            (geometric_series_sum(lambda, n) - ratio).abs() <= RESIDUAL_TOLERANCE * ratio
        };
        let lo_clamp = self.clamp;
        let hi_clamp = 1.0 - self.clamp;

        // S(lambda) < n on (0, 1): no admissible decay carries this much mass
        if ratio >= n as f64 {
            return Ok(GeometricParams {
                decay: hi_clamp,
                iterations_used: 0,
                converged: false,
            });
        }

        let mut lambda = ratio / (1.0 + ratio);
        if solved(lambda) {
            return Ok(GeometricParams {
                decay: lambda,
                iterations_used: 0,
                converged: true,
            });
        }

        let exponent = (n + 1) as i32;
        let fixed_point_budget = self.max_iterations / 2;
        let mut used = 0;
        let mut last_step = f64::INFINITY;
        while used < fixed_point_budget {
            let next = (1.0 - (lambda - lambda.powi(exponent)) / ratio).clamp(lo_clamp, hi_clamp);
            used += 1;
            let step = (next - lambda).abs();
            if step >= last_step {
                break;
            }
            lambda = next;
            last_step = step;
            if step < self.step_tolerance {
                break;
            }
        }
        if solved(lambda) {
            return Ok(GeometricParams {
                decay: lambda,
                iterations_used: used,
                converged: true,
            });
        }

        // g(lambda) = S(lambda) - ratio is increasing and convex on (0, 1)
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        if !(lambda > lo && lambda < hi) {
            lambda = 0.5;
        }
        while used < self.max_iterations {
            used += 1;
            let g = geometric_series_sum(lambda, n) - ratio;
            if g.abs() <= 0.1 * RESIDUAL_TOLERANCE * ratio {
                break;
            }
            if g > 0.0 {
                hi = lambda;
            } else {
                lo = lambda;
            }
            let newton = lambda - g / series_derivative(lambda, n);
            lambda = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            lambda = lambda.clamp(lo_clamp, hi_clamp);
            if hi - lo < f64::EPSILON * hi {
                break;
            }
        }
        Ok(GeometricParams {
            decay: lambda,
            iterations_used: used,
            converged: solved(lambda),
        })
    }
}

/// Solve for the decay factor with the default solver settings.
pub fn solve_geometric_decay(
    p_rest: f64,
    p_k: f64,
    rank_size: usize,
    k: usize,
) -> Result<GeometricParams> {
    GeometricSolver::default().solve(p_rest, p_k, rank_size, k)
}

/// Geometric completion, also returning the fitted decay (None on the
/// degenerate-mass fallback).
pub fn fit_geometric(
    obs: &PartialObservation,
    rank_size: usize,
) -> Result<(RankDistribution, Option<GeometricParams>)> {
    check_rank_size(obs, rank_size)?;
    let p_rest = obs.p_rest();
    if p_rest <= MASS_EPSILON || rank_size == obs.k() {
        return Ok((estimate_naive(obs, rank_size)?, None));
    }
    let p_k = obs.p_k();
    let params = solve_geometric_decay(p_rest, p_k, rank_size, obs.k())?;
    let mut probs = Vec::with_capacity(rank_size);
    probs.extend_from_slice(obs.top_probs());
    let mut term = p_k;
    for _ in obs.k()..rank_size {
        term *= params.decay;
        probs.push(term);
    }
    if !params.converged {
        // clamped decay cannot carry p_rest; spread the exact mass over the same shape
        let tail: f64 = probs[obs.k()..].iter().sum();
        let scale = p_rest / tail;
        probs[obs.k()..].iter_mut().for_each(|p| *p *= scale);
    }
    Ok((RankDistribution::from_parts(probs, obs.k(), None), Some(params)))
}

pub fn estimate_geometric(obs: &PartialObservation, rank_size: usize) -> Result<RankDistribution> {
    fit_geometric(obs, rank_size).map(|(d, _)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Plain bisection on the explicit sum, independent of the solver.
    fn bisect_decay(ratio: f64, n: usize) -> f64 {
        let sum = |l: f64| (1..=n).map(|j| l.powi(j as i32)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum(mid) < ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn closed_form_residual(lambda: f64, p_rest: f64, p_k: f64, n: usize) -> f64 {
        let series = (lambda - lambda.powi(n as i32 + 1)) / (1.0 - lambda);
        (p_k * series - p_rest).abs()
    }

    #[test]
    fn approximate_solution_is_exact_for_long_lists() {
        let params = solve_geometric_decay(0.1, 0.1, 1000, 3).unwrap();
        assert!(params.converged);
        assert_eq!(params.iterations_used, 0);
        assert_relative_eq!(params.decay, 0.5, epsilon = 1e-12);
        assert!(closed_form_residual(params.decay, 0.1, 0.1, 997) <= 1e-9 * 0.1);
    }

    #[test]
    fn two_thirds_decay() {
        let params = solve_geometric_decay(0.5, 0.25, 1000, 1).unwrap();
        assert!(params.converged);
        assert_relative_eq!(params.decay, 2.0 / 3.0, epsilon = 1e-12);
        assert!(closed_form_residual(params.decay, 0.5, 0.25, 999) <= 1e-9 * 0.5);
    }

    #[test]
    fn short_list_requires_iteration() {
        // 0.6 * (l + l^2 + l^3) = 0.3
        let params = solve_geometric_decay(0.3, 0.6, 4, 1).unwrap();
        assert!(params.converged);
        assert!(params.iterations_used > 0);
        let oracle = bisect_decay(0.5, 3);
        assert!((params.decay - oracle).abs() < 1e-10, "{} vs {oracle}", params.decay);
        let l = params.decay;
        assert!((0.6 * (l + l * l + l * l * l) - 0.3).abs() <= 1e-9 * 0.3);
    }

    #[test]
    fn fixed_point_converges_when_contracting() {
        // lambda around 0.9 with n = 20: lambda^21 is not negligible and the update contracts
        let n = 20;
        let ratio = (1..=n).map(|j| 0.9f64.powi(j)).sum::<f64>();
        let params = solve_geometric_decay(ratio * 0.01, 0.01, n as usize + 2, 2).unwrap();
        assert!(params.converged);
        assert_relative_eq!(params.decay, 0.9, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_ratio_is_flagged() {
        let params = solve_geometric_decay(0.7, 0.3, 2, 1).unwrap();
        assert!(!params.converged);
        assert!(params.decay < 1.0 && params.decay > 0.0);
    }

    #[test]
    fn zero_mass_is_degenerate() {
        assert!(matches!(
            solve_geometric_decay(0.0, 0.5, 10, 1),
            Err(Error::DegenerateMass(_))
        ));
    }

    #[test]
    fn geometric_tail_halves() {
        let obs = PartialObservation::new(0.5, vec![0.5, 0.3, 0.1]).unwrap();
        let d = estimate_geometric(&obs, 1000).unwrap();
        assert_relative_eq!(d.probs()[3], 0.05, epsilon = 1e-12);
        assert_relative_eq!(d.probs()[4], 0.025, epsilon = 1e-12);
        assert_relative_eq!(d.total(), 1.0, epsilon = 1e-6);
        assert_eq!(d.monotone_violations(), 0);
    }

    #[test]
    fn near_certain_observation_falls_back_to_zero_fill() {
        let obs = PartialObservation::new(1.0 - 1e-13, vec![1.0 - 1e-13]).unwrap();
        let d = estimate_geometric(&obs, 100).unwrap();
        assert!(d.probs()[1..].iter().all(|&p| p == 0.0));
        assert!(d.deficiency().unwrap() < MASS_EPSILON);
    }

    #[test]
    fn president_example_top3() {
        let obs = PartialObservation::new(0.24, vec![0.37, 0.24, 0.11]).unwrap();
        let (d, params) = fit_geometric(&obs, 1000).unwrap();
        let params = params.unwrap();
        assert!(params.converged);
        let tail: f64 = d.probs()[3..].iter().sum();
        assert_relative_eq!(tail, 0.28, epsilon = 1e-9);
        // closed-form oracle: 0.11 * l / (1 - l) = 0.28 for long lists
        assert_relative_eq!(params.decay, 0.28 / 0.39, epsilon = 1e-12);
        assert_eq!(d.monotone_violations(), 0);
        assert_relative_eq!(d.probs()[3], 0.11 * 0.28 / 0.39, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_tail_still_sums_to_one() {
        let obs = PartialObservation::new(0.3, vec![0.3]).unwrap();
        let d = estimate_geometric(&obs, 2).unwrap();
        assert_relative_eq!(d.total(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.probs()[1], 0.7, epsilon = 1e-12);
    }
}

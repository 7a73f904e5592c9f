use super::RankDistribution;
use crate::error::{Error, Result};

/// `KL(real || estimated) = sum real(k) * ln(real(k) / est(k))`.
///
/// Terms with `real(k) = 0` contribute nothing. Returns `f64::INFINITY` when
/// the estimate puts zero mass where the real distribution does not.
pub fn kl_divergence(estimated: &RankDistribution, real: &RankDistribution) -> Result<f64> {
    kl_terms(estimated.probs(), real.probs(), None)
}

/// As [`kl_divergence`], but estimated entries are floored at `floor` so the
/// result stays finite.
pub fn kl_divergence_smoothed(
    estimated: &RankDistribution,
    real: &RankDistribution,
    floor: f64,
) -> Result<f64> {
    if !(floor > 0.0) {
        return Err(Error::config("smoothing floor must be positive"));
    }
    kl_terms(estimated.probs(), real.probs(), Some(floor))
}

fn kl_terms(est: &[f64], real: &[f64], floor: Option<f64>) -> Result<f64> {
    if est.len() != real.len() {
        return Err(Error::config(format!(
            "KL operands differ in length: {} vs {}",
            est.len(),
            real.len()
        )));
    }
    let mut total = 0.0;
    for (&q, &p) in est.iter().zip(real) {
        if p == 0.0 {
            continue;
        }
        let q = floor.map_or(q, |f| q.max(f));
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += p * (p / q).ln();
    }
    // Gibbs: rounding can leave a tiny negative value for identical inputs
    Ok(total.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dist(p: &[f64]) -> RankDistribution {
        RankDistribution::new(p.to_vec(), 0).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let d = dist(&[0.6, 0.3, 0.1]);
        assert_eq!(kl_divergence(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn two_term_values() {
        let kl = kl_divergence(&dist(&[0.75, 0.25]), &dist(&[0.5, 0.5])).unwrap();
        assert_relative_eq!(kl, 0.5 * (4.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert_relative_eq!(kl, 0.1438410362, epsilon = 1e-9);
        let kl = kl_divergence(&dist(&[0.9, 0.1]), &dist(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(kl, (1.0f64 / 0.9).ln(), epsilon = 1e-15);
    }

    #[test]
    fn zero_estimate_is_infinite_unless_smoothed() {
        let est = dist(&[1.0, 0.0]);
        let real = dist(&[0.5, 0.5]);
        assert!(kl_divergence(&est, &real).unwrap().is_infinite());
        assert!(kl_divergence_smoothed(&est, &real, 1e-12).unwrap().is_finite());
    }

    #[test]
    fn length_mismatch() {
        assert!(kl_divergence(&dist(&[1.0]), &dist(&[0.5, 0.5])).is_err());
    }
}

use super::ScoredPopulation;
use crate::error::{Error, Result};

/// Mann-Whitney estimate of `P(machine score > human score)`, ties counted half.
pub fn auroc(pop: &ScoredPopulation) -> Result<f64> {
    pop.validate()?;
    let all = pop.sorted_labelled();
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < all.len() {
        let mut end = start;
        while end + 1 < all.len() && all[end + 1].0 == all[start].0 {
            end += 1;
        }
        // ranks are 1-based; a tie group shares the mean of its ranks
        let mean_rank = (start + end + 2) as f64 / 2.0;
        let pos_in_group = all[start..=end].iter().filter(|(_, p)| *p).count();
        pos_rank_sum += mean_rank * pos_in_group as f64;
        start = end + 1;
    }
    let (np, nn) = (pop.positives.len() as f64, pop.negatives.len() as f64);
    let u = pos_rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Operating points from the strictest threshold to the loosest, starting at
/// (0, 0) and ending at (1, 1). Tied scores move both rates in one step.
pub fn roc_curve(pop: &ScoredPopulation) -> Result<Vec<RocPoint>> {
    pop.validate()?;
    let mut all = pop.sorted_labelled();
    all.reverse();
    let (np, nn) = (pop.positives.len() as f64, pop.negatives.len() as f64);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let mut i = 0;
    while i < all.len() {
        let score = all[i].0;
        while i < all.len() && all[i].0 == score {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / nn,
            tpr: tp as f64 / np,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn roc_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// Largest achievable TPR at a false-positive rate no greater than `fpr_level`.
pub fn tpr_at_fpr(pop: &ScoredPopulation, fpr_level: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fpr_level) {
        return Err(Error::config(format!("FPR level {fpr_level} outside [0, 1]")));
    }
    Ok(roc_curve(pop)?
        .iter()
        .filter(|p| p.fpr <= fpr_level)
        .map(|p| p.tpr)
        .fold(0.0, f64::max))
}

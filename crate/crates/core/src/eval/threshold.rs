use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ScoredPopulation;
use crate::error::{Error, Result};

/// How the decision threshold relates to the data it is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Fit and evaluate on the same population.
    PerDataset,
    /// Fit on pooled datasets, evaluate on each.
    CrossDataset,
    /// Fit on one source model's generations, evaluate on another's.
    CrossSource,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::PerDataset => "per-dataset",
            Protocol::CrossDataset => "cross-dataset",
            Protocol::CrossSource => "cross-source",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-dataset" => Ok(Protocol::PerDataset),
            "cross-dataset" => Ok(Protocol::CrossDataset),
            "cross-source" => Ok(Protocol::CrossSource),
            other => Err(Error::config(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Outcome of classifying `score > threshold` as machine-generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub accuracy: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub protocol: Protocol,
    pub dataset: String,
}

fn counts(threshold: f64, pops: &[&ScoredPopulation]) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut p, mut n) = (0, 0, 0, 0);
    for pop in pops {
        tp += pop.positives.iter().filter(|&&s| s > threshold).count();
        fp += pop.negatives.iter().filter(|&&s| s > threshold).count();
        p += pop.positives.len();
        n += pop.negatives.len();
    }
    (tp, fp, p, n)
}

fn report(threshold: f64, pops: &[&ScoredPopulation], protocol: Protocol, dataset: String) -> ThresholdReport {
    let (tp, fp, p, n) = counts(threshold, pops);
    let tn = n - fp;
    ThresholdReport {
        threshold,
        accuracy: (tp + tn) as f64 / (p + n) as f64,
        tpr: tp as f64 / p as f64,
        fpr: fp as f64 / n as f64,
        protocol,
        dataset,
    }
}

fn pooled_name(pops: &[&ScoredPopulation]) -> String {
    pops.iter()
        .map(|p| p.dataset.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

/// Accuracy-maximizing threshold over the pooled populations.
///
/// Candidates are midpoints between adjacent distinct scores plus the two
/// infinite sentinels; ties go to the smallest threshold.
fn fit(pops: &[&ScoredPopulation]) -> Result<f64> {
    if pops.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut all: Vec<(f64, bool)> = Vec::new();
    for pop in pops {
        pop.validate()?;
        all.extend(pop.sorted_labelled());
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let positives = all.iter().filter(|(_, p)| *p).count();

    // threshold = -inf: everything is called machine
    let (mut tp, mut tn) = (positives, 0usize);
    let mut best = (tp + tn, f64::NEG_INFINITY);
    let mut i = 0;
    while i < all.len() {
        let score = all[i].0;
        while i < all.len() && all[i].0 == score {
            if all[i].1 {
                tp -= 1;
            } else {
                tn += 1;
            }
            i += 1;
        }
        let threshold = if i < all.len() {
            score / 2.0 + all[i].0 / 2.0
        } else {
            f64::INFINITY
        };
        if tp + tn > best.0 {
            best = (tp + tn, threshold);
        }
    }
    Ok(best.1)
}

/// Fit the threshold on `pops` (pooled) and report on the same pool.
pub fn best_threshold(pops: &[ScoredPopulation], protocol: Protocol) -> Result<ThresholdReport> {
    if protocol == Protocol::PerDataset && pops.len() != 1 {
        return Err(Error::config("per-dataset threshold takes exactly one population"));
    }
    let refs: Vec<&ScoredPopulation> = pops.iter().collect();
    let threshold = fit(&refs)?;
    Ok(report(threshold, &refs, protocol, pooled_name(&refs)))
}

pub fn apply_threshold(threshold: f64, pop: &ScoredPopulation, protocol: Protocol) -> Result<ThresholdReport> {
    pop.validate()?;
    Ok(report(threshold, &[pop], protocol, pop.dataset.clone()))
}

/// Fit on the held-in populations and evaluate each held-out population.
pub fn transfer_threshold(
    held_in: &[ScoredPopulation],
    held_out: &[ScoredPopulation],
    protocol: Protocol,
) -> Result<Vec<ThresholdReport>> {
    let refs: Vec<&ScoredPopulation> = held_in.iter().collect();
    let threshold = fit(&refs)?;
    held_out
        .iter()
        .map(|pop| apply_threshold(threshold, pop, protocol))
        .collect()
}

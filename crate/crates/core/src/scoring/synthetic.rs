//! Synthetic corpora with known per-position distributions.
//!
//! Each position draws a true rank distribution from a parametric family.
//! The observed token is sampled from that distribution raised to a
//! population-specific `sharpness` exponent: 1.0 samples the distribution
//! itself, larger values bias toward the top ranks the way greedy-leaning
//! decoding does.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, PassageObservation, SourceMeta};
use crate::distribution::RankDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Geometric,
    Zipfian,
    /// Two-component geometric mixture: a sharp head over a slow tail.
    Mixture,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Geometric => "geometric",
            Family::Zipfian => "zipfian",
            Family::Mixture => "mixture",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Family::Geometric),
            "zipfian" => Ok(Family::Zipfian),
            "mixture" => Ok(Family::Mixture),
            other => Err(Error::config(format!("unknown synthetic family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub family: Family,
    pub machine_sharpness: f64,
    pub human_sharpness: f64,
    /// Passages per class.
    pub passages: usize,
    pub length: usize,
    pub rank_size: usize,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            family: Family::Mixture,
            machine_sharpness: 2.0,
            human_sharpness: 1.0,
            passages: 150,
            length: 100,
            rank_size: 1000,
            top_k: 5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.passages == 0 || self.length == 0 {
            return Err(Error::config("passages and length must be positive"));
        }
        if self.top_k == 0 || self.top_k > self.rank_size {
            return Err(Error::config(format!(
                "need 1 <= top_k <= rank_size, got K={}, M={}",
                self.top_k, self.rank_size
            )));
        }
        for s in [self.machine_sharpness, self.human_sharpness] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("sharpness must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub human: Vec<PassageObservation>,
    pub machine: Vec<PassageObservation>,
}

impl SyntheticCorpus {
    /// Human passages first, then machine passages.
    pub fn passages(&self) -> impl Iterator<Item = &PassageObservation> {
        self.human.iter().chain(&self.machine)
    }
}

fn normalize(mut p: Vec<f64>) -> Vec<f64> {
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

fn geometric(decay: f64, rank_size: usize) -> Vec<f64> {
    let mut term = 1.0;
    normalize(
        (0..rank_size)
            .map(|_| {
                let t = term;
                term *= decay;
                t
            })
            .collect(),
    )
}

/// Draw one true rank distribution of length `rank_size` from `family`.
pub fn sample_truth<R: Rng + ?Sized>(family: Family, rng: &mut R, rank_size: usize) -> Vec<f64> {
    match family {
        Family::Geometric => geometric(rng.random_range(0.4..0.9), rank_size),
        Family::Zipfian => {
            let alpha: f64 = rng.random_range(1.0..2.0);
            let beta: f64 = rng.random_range(0.5..4.0);
            normalize(
                (1..=rank_size)
                    .map(|k| (k as f64 + beta).powf(-alpha))
                    .collect(),
            )
        }
        Family::Mixture => {
            let weight: f64 = rng.random_range(0.4..0.9);
            let head = geometric(rng.random_range(0.1..0.5), rank_size);
            let tail = geometric(rng.random_range(0.8..0.98), rank_size);
            normalize(
                head.iter()
                    .zip(&tail)
                    .map(|(h, t)| weight * h + (1.0 - weight) * t)
                    .collect(),
            )
        }
    }
}

/// Index drawn with probability proportional to `p^sharpness`.
fn sample_rank<R: Rng + ?Sized>(rng: &mut R, probs: &[f64], sharpness: f64) -> usize {
    let weight = |p: f64| {
        if sharpness == 1.0 {
            p
        } else {
            p.powf(sharpness)
        }
    };
    let total: f64 = probs.iter().map(|&p| weight(p)).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        let w = weight(p);
        if w > 0.0 {
            last_positive = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last_positive
}

fn gen_passage(
    config: &SynthConfig,
    label: Label,
    index: usize,
    seed: u64,
) -> Result<PassageObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sharpness = match label {
        Label::Machine => config.machine_sharpness,
        _ => config.human_sharpness,
    };
    let mut positions = Vec::with_capacity(config.length);
    let mut truths = Vec::with_capacity(config.length);
    for _ in 0..config.length {
        let truth = RankDistribution::new(sample_truth(config.family, &mut rng, config.rank_size), 0)?;
        let rank = sample_rank(&mut rng, truth.probs(), sharpness);
        positions.push(truth.observe(config.top_k, truth.probs()[rank])?);
        truths.push(truth);
    }
    let meta = SourceMeta {
        provider: "synthetic".into(),
        model: config.family.to_string(),
        top_k: config.top_k,
        ..SourceMeta::default()
    };
    PassageObservation::new(format!("{label}-{index:05}"), label, positions, meta)?.with_truths(truths)
}

/// Generate `config.passages` human and machine passages, deterministic in `config.seed`.
pub fn gen_synthetic(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let mut human = Vec::with_capacity(config.passages);
    let mut machine = Vec::with_capacity(config.passages);
    for i in 0..config.passages {
        human.push(gen_passage(config, Label::Human, i, master.next_u64())?);
        machine.push(gen_passage(config, Label::Machine, i, master.next_u64())?);
    }
    Ok(SyntheticCorpus { human, machine })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            passages: 4,
            length: 12,
            rank_size: 50,
            top_k: 3,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(gen_synthetic(&small(7)).unwrap(), gen_synthetic(&small(7)).unwrap());
        assert_ne!(gen_synthetic(&small(7)).unwrap(), gen_synthetic(&small(8)).unwrap());
    }

    #[test]
    fn truths_are_sorted_distributions() {
        for family in [Family::Geometric, Family::Zipfian, Family::Mixture] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for _ in 0..20 {
                let p = sample_truth(family, &mut rng, 200);
                let d = RankDistribution::new(p, 0).unwrap();
                assert_eq!(d.monotone_violations(), 0, "{family}");
            }
        }
    }

    #[test]
    fn complete_observation_equals_truth() {
        let config = SynthConfig {
            top_k: 20,
            rank_size: 20,
            ..small(3)
        };
        let corpus = gen_synthetic(&config).unwrap();
        for passage in corpus.passages() {
            for (obs, truth) in passage.positions.iter().zip(passage.truths.as_ref().unwrap()) {
                assert_eq!(obs.top_probs(), truth.probs());
            }
        }
    }

    #[test]
    fn invalid_config() {
        let config = SynthConfig {
            top_k: 60,
            ..small(0)
        };
        assert!(gen_synthetic(&config).is_err());
        let config = SynthConfig {
            machine_sharpness: 0.0,
            ..small(0)
        };
        assert!(gen_synthetic(&config).is_err());
    }

    #[test]
    fn sampling_respects_zero_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let i = sample_rank(&mut rng, &[0.0, 0.7, 0.3, 0.0], 3.0);
            assert!(i == 1 || i == 2);
        }
    }
}

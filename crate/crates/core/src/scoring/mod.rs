//! Acquisition of passage observations: remote echo-mode completions,
//! JSONL dumps, and a synthetic generator with known true distributions.

mod client;
mod dump;
mod synthetic;

pub use client::{CompletionClient, FetchRequest, Prompt, ProviderConfig, API_KEY_ENV};
pub use dump::{
    open_dump, read_dump, read_dump_salvage, write_dump, DumpReader, DumpWriter, Salvaged,
};
pub use synthetic::{gen_synthetic, sample_truth, Family, SynthConfig, SyntheticCorpus};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::{PartialObservation, RankDistribution};
use crate::error::{Error, Result};

/// Passages with a larger share of unusable positions are rejected.
pub const MAX_SKIP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Human,
    Machine,
    #[default]
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Human => "human",
            Label::Machine => "machine",
            Label::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Label::Human),
            "machine" => Ok(Label::Machine),
            "unknown" => Ok(Label::Unknown),
            other => Err(Error::config(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SourceMeta {
    #[serde(default)]
    pub provider: String,
    #[serde(default)]
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    /// Number of leading positions that belonged to the prompt and were dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_boundary: Option<usize>,
    #[serde(default)]
    pub top_k: usize,
    /// Unix seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
    #[serde(default)]
    pub skipped_positions: usize,
}

/// Scored positions of one passage plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageObservation {
    pub id: String,
    pub label: Label,
    pub text: Option<String>,
    pub tokens: Option<Vec<String>>,
    pub positions: Vec<PartialObservation>,
    /// Full true rank distributions, when known (synthetic corpora).
    pub truths: Option<Vec<RankDistribution>>,
    pub meta: SourceMeta,
}

impl PassageObservation {
    pub fn new(
        id: impl Into<String>,
        label: Label,
        positions: Vec<PartialObservation>,
        meta: SourceMeta,
    ) -> Result<Self> {
        let obs = Self {
            id: id.into(),
            label,
            text: None,
            tokens: None,
            positions,
            truths: None,
            meta,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn with_truths(mut self, truths: Vec<RankDistribution>) -> Result<Self> {
        self.truths = Some(truths);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidObservation(format!(
                "passage {} has no scored positions",
                self.id
            )));
        }
        if self.meta.top_k > 0 {
            if let Some(obs) = self.positions.iter().find(|o| o.k() > self.meta.top_k) {
                return Err(Error::InvalidObservation(format!(
                    "passage {} has a top-{} position but top-{} was requested",
                    self.id,
                    obs.k(),
                    self.meta.top_k
                )));
            }
        }
        let total = self.positions.len() + self.meta.skipped_positions;
        if self.meta.skipped_positions as f64 > MAX_SKIP_FRACTION * total as f64 {
            return Err(Error::InvalidObservation(format!(
                "passage {} skipped {} of {total} positions",
                self.id, self.meta.skipped_positions
            )));
        }
        if let Some(truths) = &self.truths {
            if truths.len() != self.positions.len() {
                return Err(Error::InvalidObservation(format!(
                    "passage {} has {} truths for {} positions",
                    self.id,
                    truths.len(),
                    self.positions.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

//! Evaluation of scored populations: AUROC, ROC curves, TPR at a fixed FPR,
//! threshold selection and transfer, and KL-vs-K sweeps.

mod report;
mod roc;
mod sweep;
mod threshold;

pub use report::{write_report_csv, write_roc_csv, ReportRow, REPORT_HEADER};
pub use roc::{auroc, roc_area, roc_curve, tpr_at_fpr, RocPoint};
pub use sweep::{kl_sweep, write_kl_csv, KlCell};
pub use threshold::{apply_threshold, best_threshold, transfer_threshold, Protocol, ThresholdReport};

use crate::error::{Error, Result};

/// Machine-labelled (positive) and human-labelled (negative) scores for one
/// method/estimator/dataset cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredPopulation {
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
    pub method: String,
    pub estimator: String,
    pub dataset: String,
    pub source: String,
}

impl ScoredPopulation {
    pub fn new(positives: Vec<f64>, negatives: Vec<f64>) -> Result<Self> {
        let pop = Self {
            positives,
            negatives,
            ..Self::default()
        };
        pop.validate()?;
        Ok(pop)
    }

    pub fn tagged(mut self, method: &str, estimator: &str, dataset: &str, source: &str) -> Self {
        self.method = method.into();
        self.estimator = estimator.into();
        self.dataset = dataset.into();
        self.source = source.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.positives.is_empty() || self.negatives.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        if self
            .positives
            .iter()
            .chain(&self.negatives)
            .any(|s| !s.is_finite())
        {
            return Err(Error::config("population scores must be finite"));
        }
        Ok(())
    }

    /// Swap the roles of the two classes.
    pub fn flipped(&self) -> Self {
        Self {
            positives: self.negatives.clone(),
            negatives: self.positives.clone(),
            ..self.clone()
        }
    }

    /// `(score, is_positive)` pairs sorted ascending by score.
    pub(crate) fn sorted_labelled(&self) -> Vec<(f64, bool)> {
        let mut all: Vec<(f64, bool)> = self
            .positives
            .iter()
            .map(|&s| (s, true))
            .chain(self.negatives.iter().map(|&s| (s, false)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        all
    }
}

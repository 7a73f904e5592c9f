//! Completion of top-K logprob observations into full rank distributions,
//! and zero-shot machine-generated text detection on top of them.
//!
//! The pipeline is: acquire [`scoring::PassageObservation`]s (remote
//! echo-mode API, JSONL dump, or synthetic generator), complete each
//! position with a [`distribution::Estimator`], compute a
//! [`metrics::Method`] score per passage, and evaluate populations with
//! [`eval`].

pub mod distribution;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod mlp;
pub mod scoring;

pub use distribution::{Estimator, EstimatorKind, PartialObservation, RankDistribution};
pub use error::{Error, ProviderError, Result};
pub use metrics::{Method, PassageScore};

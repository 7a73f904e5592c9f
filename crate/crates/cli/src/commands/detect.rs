use glimpse::scoring::Label;
use serde::Serialize;

use crate::cli::DetectArgs;
use crate::error::{CliError, CliResult};
use crate::records::{output, read_scores, write_jsonl};
use crate::settings::{layered, FileConfig};

#[derive(Debug, Serialize)]
struct Verdict<'a> {
    id: &'a str,
    label: Label,
    metric: f64,
    verdict: Label,
}

pub fn run(args: DetectArgs, file: &FileConfig) -> CliResult<()> {
    let threshold = layered(args.threshold, file.threshold, "GLIMPSE_THRESHOLD")?
        .ok_or_else(|| CliError::config("detect needs a threshold (--threshold, config file or GLIMPSE_THRESHOLD)"))?;
    if !threshold.is_finite() {
        return Err(CliError::config(format!("threshold must be finite, got {threshold}")));
    }
    let scores = read_scores(&args.input)?;
    let verdicts: Vec<Verdict> = scores
        .iter()
        .map(|s| Verdict {
            id: &s.id,
            label: s.label,
            metric: s.metric,
            verdict: if s.metric > threshold { Label::Machine } else { Label::Human },
        })
        .collect();
    let labelled: Vec<_> = verdicts.iter().filter(|v| v.label != Label::Unknown).collect();
    if !labelled.is_empty() {
        let correct = labelled.iter().filter(|v| v.label == v.verdict).count();
        log::info!("accuracy {:.4} on {} labelled passages", correct as f64 / labelled.len() as f64, labelled.len());
    }
    let mut out = output(args.out.as_deref())?;
    write_jsonl(&mut *out, &verdicts)
}

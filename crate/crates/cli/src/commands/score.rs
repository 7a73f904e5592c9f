use glimpse::metrics::{score, Method};
use glimpse::scoring::{open_dump, read_dump_salvage, PassageObservation};
use glimpse::{Error, EstimatorKind};
use rayon::prelude::*;

use super::{thread_pool, DEFAULT_TOP_K};
use crate::cli::ScoreArgs;
use crate::error::{CliError, CliResult};
use crate::estimators;
use crate::records::{output, write_jsonl, Aux, ScoreRecord};
use crate::settings::{layered, layered_str, FileConfig};

/// Dataset tag from a dump path: file name without `.gz` and `.jsonl`.
fn dataset_tag(path: &std::path::Path) -> String {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for ext in [".gz", ".jsonl", ".json"] {
        if let Some(stem) = name.strip_suffix(ext) {
            name = stem.to_string();
        }
    }
    name
}

fn cut(passage: &PassageObservation, top_k: usize) -> glimpse::Result<Vec<glimpse::PartialObservation>> {
    passage
        .positions
        .iter()
        .map(|o| if o.k() > top_k { o.truncated(top_k) } else { Ok(o.clone()) })
        .collect()
}

pub fn run(args: ScoreArgs, file: &FileConfig) -> CliResult<()> {
    let method: Method = layered_str(args.method, file.method.clone(), "GLIMPSE_METHOD", "method")?
        .unwrap_or(Method::Curvature);
    let kind: EstimatorKind =
        layered_str(args.estimator.estimator, file.estimator.clone(), "GLIMPSE_ESTIMATOR", "estimator")?
            .unwrap_or(EstimatorKind::Geometric);
    let top_k = layered(args.estimator.top_k, file.top_k, "GLIMPSE_TOP_K")?.unwrap_or(DEFAULT_TOP_K);
    let rank_size = layered(args.estimator.rank_size, file.rank_size, "GLIMPSE_RANK_SIZE")?
        .unwrap_or(kind.default_rank_size());
    let jobs = layered(args.jobs, file.jobs, "GLIMPSE_JOBS")?.unwrap_or(0);
    if top_k == 0 || top_k > rank_size {
        return Err(CliError::config(format!("need 1 <= top-k <= rank-size, got K={top_k}, M={rank_size}")));
    }
    let estimator = estimators::build(kind, &args.estimator.mlp_models, !args.estimator.no_zipf_rescale)?;

    let passages = if args.salvage {
        read_dump_salvage(&args.input).map(|s| {
            s.warnings.iter().for_each(|w| log::warn!("{w}"));
            s.passages
        })
    } else {
        open_dump(&args.input).and_then(|r| r.collect::<glimpse::Result<Vec<_>>>())
    }
    .map_err(|e| CliError::from(e).context(args.input.display()))?;
    let dataset = args.dataset.unwrap_or_else(|| dataset_tag(&args.input));
    let source = args.source.unwrap_or_else(|| "unknown".into());

    let results: Vec<glimpse::Result<ScoreRecord>> = thread_pool(jobs)?.install(|| {
        passages
            .par_iter()
            .map(|p| {
                let positions = cut(p, top_k)?;
                let s = score(method, &positions, &estimator, rank_size)?;
                Ok(ScoreRecord {
                    id: p.id.clone(),
                    label: p.label,
                    method: method.to_string(),
                    estimator: kind.to_string(),
                    metric: s.metric,
                    n_tokens: s.n_tokens,
                    aux: Aux {
                        log_likelihood: s.log_likelihood,
                        mu_total: s.mu_total,
                        sigma2_total: s.sigma2_total,
                        top_k,
                        rank_size,
                        dataset: dataset.clone(),
                        source: source.clone(),
                    },
                })
            })
            .collect()
    });

    let mut records = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for (p, r) in passages.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e @ (Error::DegenerateVariance | Error::DegenerateMass(_))) if args.skip_degenerate => {
                log::warn!("skipping passage {}: {e}", p.id);
                skipped += 1;
            }
            Err(e) => return Err(CliError::from(e).context(format!("passage {}", p.id))),
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} degenerate passages");
    }
    let mut out = output(args.out.as_deref())?;
    write_jsonl(&mut *out, &records)
}

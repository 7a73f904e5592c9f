use glimpse::mlp::{save_model, train_mlp, TrainConfig, TrainingExample};
use glimpse::scoring::{open_dump, sample_truth, Family};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DEFAULT_TOP_K;
use crate::cli::TrainArgs;
use crate::error::{CliError, CliResult};
use crate::settings::{layered, parse, FileConfig};

const DEFAULT_RANK_SIZE: usize = 100;
const DEFAULT_EXAMPLES: usize = 5000;

pub fn run(args: TrainArgs, file: &FileConfig) -> CliResult<()> {
    let t = &file.train;
    let d = TrainConfig::default();
    let top_k = layered(args.top_k, file.top_k, "GLIMPSE_TOP_K")?.unwrap_or(DEFAULT_TOP_K);
    let rank_size = layered(args.rank_size, file.rank_size, "GLIMPSE_RANK_SIZE")?.unwrap_or(DEFAULT_RANK_SIZE);
    let seed = layered(args.seed, file.seed, "GLIMPSE_SEED")?.unwrap_or(d.seed);

    let (dataset, examples) = match &args.input {
        Some(path) => {
            let mut examples = Vec::new();
            let in_file = |e: glimpse::Error| CliError::from(e).context(path.display());
            for passage in open_dump(path).map_err(in_file)? {
                let passage = passage.map_err(in_file)?;
                let truths = passage.truths.ok_or_else(|| {
                    glimpse::Error::MissingTruth(format!("passage {} has no true_probs", passage.id))
                })?;
                for truth in truths {
                    examples.push(TrainingExample::from_teacher(truth.probs(), top_k, rank_size)?);
                }
            }
            (path.display().to_string(), examples)
        }
        None => {
            let family: Family = parse(args.family.or(t.family.clone()), "family")?.unwrap_or(Family::Mixture);
            let n = args.examples.or(t.examples).unwrap_or(DEFAULT_EXAMPLES);
            // teachers longer than M so the fold-into-rank-M path is exercised
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let examples = (0..n)
                .map(|_| TrainingExample::from_teacher(&sample_truth(family, &mut rng, 2 * rank_size), top_k, rank_size))
                .collect::<glimpse::Result<Vec<_>>>()?;
            (format!("synthetic-{family}"), examples)
        }
    };
    if examples.is_empty() {
        return Err(CliError::io("no training examples"));
    }
    let config = TrainConfig {
        hidden: args.hidden.or(t.hidden).unwrap_or(d.hidden),
        epochs: args.epochs.or(t.epochs).unwrap_or(d.epochs),
        step_size: args.step_size.or(t.step_size).unwrap_or(d.step_size),
        batch_size: args.batch_size.or(t.batch_size).unwrap_or(d.batch_size),
        seed,
        strict: args.strict,
        dataset,
    };
    let (model, report) = train_mlp(&examples, &config)?;
    log::info!(
        "trained K={top_k} M={rank_size} H={} on {} examples: loss {:.6} -> {:.6}",
        config.hidden,
        examples.len(),
        report.initial_loss(),
        report.final_loss()
    );
    save_model(&model, &args.out)?;
    Ok(())
}

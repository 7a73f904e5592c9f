use glimpse::scoring::{gen_synthetic, write_dump, Family, SynthConfig};

use super::DEFAULT_TOP_K;
use crate::cli::SynthArgs;
use crate::error::CliResult;
use crate::settings::{layered, parse, FileConfig};

pub fn run(args: SynthArgs, file: &FileConfig) -> CliResult<()> {
    let d = SynthConfig::default();
    let s = &file.synth;
    let family: Option<Family> = parse(args.family.or(s.family.clone()), "family")?;
    let config = SynthConfig {
        family: family.unwrap_or(d.family),
        machine_sharpness: args.machine_sharpness.or(s.machine_sharpness).unwrap_or(d.machine_sharpness),
        human_sharpness: args.human_sharpness.or(s.human_sharpness).unwrap_or(d.human_sharpness),
        passages: args.passages.or(s.passages).unwrap_or(d.passages),
        length: args.length.or(s.length).unwrap_or(d.length),
        rank_size: layered(args.rank_size, file.rank_size, "GLIMPSE_RANK_SIZE")?.unwrap_or(d.rank_size),
        top_k: layered(args.top_k, file.top_k, "GLIMPSE_TOP_K")?.unwrap_or(DEFAULT_TOP_K),
        seed: layered(args.seed, file.seed, "GLIMPSE_SEED")?.unwrap_or(d.seed),
    };
    let corpus = gen_synthetic(&config)?;
    write_dump(corpus.passages(), &args.out)?;
    log::info!(
        "wrote {} passages ({} family, seed {}) to {}",
        2 * config.passages,
        config.family,
        config.seed,
        args.out.display()
    );
    Ok(())
}

use glimpse::eval::{kl_sweep, write_kl_csv};
use glimpse::scoring::read_dump;
use glimpse::EstimatorKind;

use crate::cli::KlArgs;
use crate::error::{CliError, CliResult};
use crate::estimators;
use crate::records::output;

pub fn run(args: KlArgs) -> CliResult<()> {
    let passages = read_dump(&args.input).map_err(|e| CliError::from(e).context(args.input.display()))?;
    let built = args
        .estimators
        .iter()
        .map(|name| {
            let kind: EstimatorKind = name.parse()?;
            Ok((kind.as_str(), estimators::build(kind, &args.mlp_models, true)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let refs: Vec<_> = built.iter().map(|(n, e)| (*n, e)).collect();
    let cells = kl_sweep(&passages, &refs, &args.ks)?;
    write_kl_csv(&cells, output(args.out.as_deref())?)?;
    Ok(())
}

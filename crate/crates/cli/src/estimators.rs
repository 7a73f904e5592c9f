use std::path::PathBuf;

use glimpse::distribution::{MlpBank, ZipfianTables};
use glimpse::mlp::load_model;
use glimpse::{Estimator, EstimatorKind};

use crate::error::{CliError, CliResult};

pub fn build(kind: EstimatorKind, mlp_models: &[PathBuf], zipf_rescale: bool) -> CliResult<Estimator> {
    Ok(match kind {
        EstimatorKind::Naive => Estimator::Naive,
        EstimatorKind::Geometric => Estimator::Geometric,
        EstimatorKind::Zipfian => Estimator::Zipfian(ZipfianTables::with_rescale(zipf_rescale)),
        EstimatorKind::Mlp => {
            if mlp_models.is_empty() {
                return Err(CliError::config("the mlp estimator needs at least one --mlp-model"));
            }
            let mut bank = MlpBank::new();
            for path in mlp_models {
                let model = load_model(path).map_err(|e| CliError::from(e).context(path.display()))?;
                bank.insert(model);
            }
            Estimator::Mlp(bank)
        }
    })
}

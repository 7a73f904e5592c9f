use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use super::{
    build_sum_table, estimate_geometric, estimate_mlp, estimate_naive, estimate_zipfian_with,
    PartialObservation, RankDistribution, SumTable,
};
use crate::error::{Error, Result};
use crate::mlp::MlpModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Naive,
    Geometric,
    Zipfian,
    Mlp,
}

impl EstimatorKind {
    /// Rank-list size used when none is configured.
    pub fn default_rank_size(self) -> usize {
        match self {
            EstimatorKind::Naive | EstimatorKind::Geometric => 1000,
            EstimatorKind::Zipfian | EstimatorKind::Mlp => 100,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Geometric => "geometric",
            EstimatorKind::Zipfian => "zipfian",
            EstimatorKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(EstimatorKind::Naive),
            "geometric" => Ok(EstimatorKind::Geometric),
            "zipfian" => Ok(EstimatorKind::Zipfian),
            "mlp" => Ok(EstimatorKind::Mlp),
            other => Err(Error::config(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Lazily built sum tables, one per `(M, K)`.
#[derive(Debug, Default)]
pub struct ZipfianTables {
    rescale: bool,
    tables: Mutex<HashMap<(usize, usize), Arc<SumTable>>>,
}

impl ZipfianTables {
    pub fn new() -> Self {
        Self::with_rescale(true)
    }

    /// `rescale = false` keeps the raw grid tail (ablation).
    pub fn with_rescale(rescale: bool) -> Self {
        Self {
            rescale,
            tables: Mutex::new(HashMap::new()),
        }
    }

    pub fn insert(&self, table: SumTable) {
        let key = (table.rank_size(), table.k());
        self.tables.lock().unwrap().insert(key, Arc::new(table));
    }

    pub fn table(&self, rank_size: usize, k: usize) -> Result<Arc<SumTable>> {
        let mut tables = self.tables.lock().unwrap();
        if let Some(t) = tables.get(&(rank_size, k)) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(build_sum_table(rank_size, k)?);
        tables.insert((rank_size, k), Arc::clone(&table));
        Ok(table)
    }

    pub fn rescale(&self) -> bool {
        self.rescale
    }
}

/// Trained MLP estimators keyed by their input size K.
#[derive(Debug, Clone, Default)]
pub struct MlpBank {
    models: HashMap<usize, Arc<MlpModel>>,
}

impl MlpBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(model: MlpModel) -> Self {
        let mut bank = Self::new();
        bank.insert(model);
        bank
    }

    pub fn insert(&mut self, model: MlpModel) {
        self.models.insert(model.k(), Arc::new(model));
    }

    pub fn get(&self, k: usize) -> Option<&MlpModel> {
        self.models.get(&k).map(|m| m.as_ref())
    }
}

/// A configured completion algorithm.
#[derive(Debug)]
pub enum Estimator {
    Naive,
    Geometric,
    Zipfian(ZipfianTables),
    Mlp(MlpBank),
}

impl Estimator {
    pub fn zipfian() -> Self {
        Estimator::Zipfian(ZipfianTables::new())
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            Estimator::Naive => EstimatorKind::Naive,
            Estimator::Geometric => EstimatorKind::Geometric,
            Estimator::Zipfian(_) => EstimatorKind::Zipfian,
            Estimator::Mlp(_) => EstimatorKind::Mlp,
        }
    }

    pub fn estimate(&self, obs: &PartialObservation, rank_size: usize) -> Result<RankDistribution> {
        match self {
            Estimator::Naive => estimate_naive(obs, rank_size),
            Estimator::Geometric => estimate_geometric(obs, rank_size),
            Estimator::Zipfian(tables) => {
                if rank_size == obs.k() {
                    return estimate_naive(obs, rank_size);
                }
                let table = tables.table(rank_size, obs.k())?;
                estimate_zipfian_with(obs, rank_size, &table, tables.rescale).map(|(d, _)| d)
            }
            Estimator::Mlp(bank) => {
                let model = bank.get(obs.k()).ok_or_else(|| {
                    Error::config(format!("no MLP model for top-k {}", obs.k()))
                })?;
                estimate_mlp(obs, rank_size, model)
            }
        }
    }
}

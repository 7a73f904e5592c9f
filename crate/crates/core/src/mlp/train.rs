use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MlpModel;
use crate::distribution::NUMERIC_SLACK;
use crate::error::{Error, Result};

/// One teacher distribution: log top-K input and full rank-ordered target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl TrainingExample {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if input.is_empty() || target.len() <= input.len() {
            return Err(Error::config("training example needs 1 <= K < M"));
        }
        if input.iter().any(|x| !(x.is_finite() && *x <= 0.0)) {
            return Err(Error::InvalidObservation(
                "training inputs must be finite log-probabilities".into(),
            ));
        }
        if target.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || target.iter().sum::<f64>() > 1.0 + NUMERIC_SLACK
        {
            return Err(Error::InvalidObservation(
                "training target must be a sub-probability vector".into(),
            ));
        }
        Ok(Self { input, target })
    }

    /// Build from a teacher distribution over any number of outcomes.
    ///
    /// Entries are sorted into rank order, cut to the top `rank_size`, and
    /// the mass beyond rank M is folded into rank M.
    pub fn from_teacher(teacher: &[f64], k: usize, rank_size: usize) -> Result<Self> {
        if k == 0 || rank_size <= k || teacher.len() < k {
            return Err(Error::config(format!(
                "teacher of size {} cannot give K={k}, M={rank_size}",
                teacher.len()
            )));
        }
        let mut ranked = teacher.to_vec();
        ranked.sort_by(|a, b| b.total_cmp(a));
        let mut target = vec![0.0; rank_size];
        let keep = ranked.len().min(rank_size);
        target[..keep].copy_from_slice(&ranked[..keep]);
        if ranked.len() > rank_size {
            target[rank_size - 1] += ranked[rank_size..].iter().sum::<f64>();
        }
        if target[..k].iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidObservation(
                "teacher has zero probability inside the top-k".into(),
            ));
        }
        let input = target[..k].iter().map(|p| p.ln()).collect();
        Self::new(input, target)
    }

    pub fn k(&self) -> usize {
        self.input.len()
    }

    pub fn m(&self) -> usize {
        self.target.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub step_size: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Abort on the first epoch whose mean loss exceeds the previous one.
    pub strict: bool,
    pub dataset: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 20,
            step_size: 0.01,
            batch_size: 128,
            seed: 0,
            strict: false,
            dataset: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean dataset loss before training (index 0) and after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.epoch_losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().unwrap()
    }
}

fn mean_loss(model: &MlpModel, dataset: &[TrainingExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in dataset {
        total += model.loss(&ex.input, &ex.target[model.k()..])?;
    }
    Ok(total / dataset.len() as f64)
}

/// Mini-batch gradient descent on the tail cross-entropy.
pub fn train_mlp(dataset: &[TrainingExample], config: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::config("training dataset is empty"))?;
    let (k, m) = (first.k(), first.m());
    if let Some(i) = dataset.iter().position(|ex| ex.k() != k || ex.m() != m) {
        return Err(Error::config(format!(
            "example {i} has shape (K={}, M={}), expected (K={k}, M={m})",
            dataset[i].k(),
            dataset[i].m()
        )));
    }
    if config.batch_size == 0 || !(config.step_size > 0.0) {
        return Err(Error::config("batch_size and step_size must be positive"));
    }

    let mut model = MlpModel::init(k, m, config.hidden, config.seed)?;
    model.meta.dataset = config.dataset.clone();
    model.meta.epochs = config.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut losses = vec![mean_loss(&model, dataset)?];
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset[i].clone()));
            let (loss, grads) = model.loss_gradient(&batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    reason: format!("batch loss {loss}"),
                });
            }
            model.apply_gradients(&grads, config.step_size);
        }
        let loss = mean_loss(&model, dataset)?;
        if !loss.is_finite() || !model.all_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                reason: format!("mean loss {loss}"),
            });
        }
        let previous = *losses.last().unwrap();
        if config.strict && loss > previous {
            return Err(Error::TrainingDiverged {
                epoch,
                reason: format!("mean loss rose from {previous} to {loss}"),
            });
        }
        debug!("epoch {epoch}: mean loss {loss:.6}");
        losses.push(loss);
    }
    let report = TrainReport {
        epoch_losses: losses,
    };
    if report.final_loss() > report.initial_loss() {
        return Err(Error::TrainingDiverged {
            epoch: config.epochs,
            reason: format!(
                "final loss {} exceeds initial loss {}",
                report.final_loss(),
                report.initial_loss()
            ),
        });
    }
    Ok((model, report))
}

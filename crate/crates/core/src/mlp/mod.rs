//! Single-hidden-layer network predicting the tail of a rank distribution.
//!
//! Input is `x_k = ln p_k` for the observed prefix; the output layer has one
//! logit per tail rank `K+1..=M` and a softmax turns it into `p_mlp`.

mod format;
mod train;

pub use format::{load_model, save_model};
pub use train::{train_mlp, TrainConfig, TrainReport, TrainingExample};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub version: u32,
    pub activation: String,
    pub dataset: String,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self {
            version: MODEL_VERSION,
            activation: "relu".into(),
            dataset: String::new(),
            epochs: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    k: usize,
    m: usize,
    hidden: usize,
    /// hidden x k, row-major
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// (m - k) x hidden, row-major
    w2: Vec<f64>,
    b2: Vec<f64>,
    pub meta: ModelMeta,
}

/// Gradients in the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Self {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    /// Flattened as `w1, b1, w2, b2`, matching [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }
}

pub(crate) struct Activations {
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub log_probs: Vec<f64>,
}

fn check_shape(k: usize, m: usize, hidden: usize) -> Result<()> {
    if k == 0 || hidden == 0 || m <= k {
        return Err(Error::config(format!(
            "MLP shape needs K >= 1, H >= 1, M > K; got K={k}, M={m}, H={hidden}"
        )));
    }
    Ok(())
}

impl MlpModel {
    /// All weights and biases zero: the tail prediction is uniform.
    pub fn zeros(k: usize, m: usize, hidden: usize) -> Result<Self> {
        check_shape(k, m, hidden)?;
        let out = m - k;
        Ok(Self {
            k,
            m,
            hidden,
            w1: vec![0.0; hidden * k],
            b1: vec![0.0; hidden],
            w2: vec![0.0; out * hidden],
            b2: vec![0.0; out],
            meta: ModelMeta::default(),
        })
    }

    /// Seeded uniform initialization scaled by fan-in.
    pub fn init(k: usize, m: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(k, m, hidden)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = (6.0 / k as f64).sqrt();
        model.w1.iter_mut().for_each(|w| *w = rng.random_range(-s1..s1));
        let s2 = (1.0 / hidden as f64).sqrt();
        model.w2.iter_mut().for_each(|w| *w = rng.random_range(-s2..s2));
        model.meta.seed = seed;
        Ok(model)
    }

    pub(crate) fn from_raw(
        k: usize,
        m: usize,
        hidden: usize,
        params: &[f64],
        meta: ModelMeta,
    ) -> Result<Self> {
        let mut model = Self::zeros(k, m, hidden)?;
        model.set_parameters(params)?;
        model.meta = meta;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn output_size(&self) -> usize {
        self.m - self.k
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flattened as `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::config(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("MLP parameters must be finite"));
        }
        let mut rest = params;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub(crate) fn activations(&self, input: &[f64]) -> Activations {
        let mut pre_hidden = self.b1.clone();
        for (h, row) in pre_hidden.iter_mut().zip(self.w1.chunks_exact(self.k)) {
            *h += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
        let hidden: Vec<f64> = pre_hidden.iter().map(|&a| a.max(0.0)).collect();
        let mut logits = self.b2.clone();
        for (z, row) in logits.iter_mut().zip(self.w2.chunks_exact(self.hidden)) {
            *z += row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let log_probs = logits.iter().map(|z| z - log_norm).collect();
        Activations {
            pre_hidden,
            hidden,
            log_probs,
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.k {
            return Err(Error::config(format!(
                "MLP expects {} inputs, got {}",
                self.k,
                input.len()
            )));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("MLP inputs must be finite"));
        }
        Ok(())
    }

    /// Tail distribution over ranks `K+1..=M`; sums to one.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self
            .activations(input)
            .log_probs
            .into_iter()
            .map(f64::exp)
            .collect())
    }

    /// Cross-entropy `-sum_j t_j ln p_mlp(j)` against an unnormalized tail target.
    pub fn loss(&self, input: &[f64], tail_target: &[f64]) -> Result<f64> {
        self.check_input(input)?;
        if tail_target.len() != self.output_size() {
            return Err(Error::config("target tail length does not match model output"));
        }
        let act = self.activations(input);
        Ok(-tail_target
            .iter()
            .zip(&act.log_probs)
            .map(|(t, lp)| t * lp)
            .sum::<f64>())
    }

    /// Mean loss and its analytic gradient over `batch`.
    pub fn loss_gradient(&self, batch: &[TrainingExample]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::config("empty batch"));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut total = 0.0;
        let mut d_logits = vec![0.0; self.output_size()];
        let mut d_hidden = vec![0.0; self.hidden];
        for ex in batch {
            if ex.input.len() != self.k || ex.target.len() != self.m {
                return Err(Error::config("training example shape does not match model"));
            }
            let tail = &ex.target[self.k..];
            let act = self.activations(&ex.input);
            let mass: f64 = tail.iter().sum();
            for ((d, lp), t) in d_logits.iter_mut().zip(&act.log_probs).zip(tail) {
                total -= t * lp;
                *d = mass * lp.exp() - t;
            }
            d_hidden.iter_mut().for_each(|d| *d = 0.0);
            for (o, &dz) in d_logits.iter().enumerate() {
                grads.b2[o] += dz;
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                let grow = &mut grads.w2[o * self.hidden..(o + 1) * self.hidden];
                for h in 0..self.hidden {
                    grow[h] += dz * act.hidden[h];
                    d_hidden[h] += dz * row[h];
                }
            }
            for h in 0..self.hidden {
                if act.pre_hidden[h] <= 0.0 {
                    continue;
                }
                let da = d_hidden[h];
                grads.b1[h] += da;
                let grow = &mut grads.w1[h * self.k..(h + 1) * self.k];
                for (g, x) in grow.iter_mut().zip(&ex.input) {
                    *g += da * x;
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for g in [&mut grads.w1, &mut grads.b1, &mut grads.w2, &mut grads.b2] {
            g.iter_mut().for_each(|v| *v *= scale);
        }
        Ok((total * scale, grads))
    }

    pub(crate) fn apply_gradients(&mut self, grads: &Gradients, step_size: f64) {
        for (p, g) in [
            (&mut self.w1, &grads.w1),
            (&mut self.b1, &grads.b1),
            (&mut self.w2, &grads.w2),
            (&mut self.b2, &grads.b2),
        ] {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= step_size * g);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.is_finite())
    }
}

use std::io::Write;

use serde::Serialize;

use crate::distribution::{kl_divergence, Estimator};
use crate::error::{Error, Result};
use crate::scoring::PassageObservation;

/// Mean KL(true || estimated) for one estimator at one top-k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlCell {
    pub estimator: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub rank_size: usize,
    /// Mean over positions with a finite divergence.
    pub mean_kl: f64,
    pub finite: usize,
    /// Positions where the estimate gives zero mass to a rank the truth uses.
    pub infinite: usize,
}

/// Re-observe every true distribution at each `k`, complete it with each
/// estimator, and average the divergence from the truth.
pub fn kl_sweep(
    passages: &[PassageObservation],
    estimators: &[(&str, &Estimator)],
    ks: &[usize],
) -> Result<Vec<KlCell>> {
    let mut truths = Vec::new();
    for p in passages {
        let t = p
            .truths
            .as_ref()
            .ok_or_else(|| Error::MissingTruth(p.id.clone()))?;
        truths.extend(t.iter().zip(&p.positions));
    }
    if truths.is_empty() {
        return Err(Error::MissingTruth("no positions to sweep".into()));
    }
    let mut cells = Vec::with_capacity(estimators.len() * ks.len());
    for &(name, estimator) in estimators {
        for &k in ks {
            let mut sum = 0.0;
            let (mut finite, mut infinite) = (0, 0);
            let mut rank_size = 0;
            for &(truth, pos) in &truths {
                rank_size = truth.len();
                let token_prob = pos.token_prob().min(truth.probs()[0]);
                let obs = truth.observe(k, token_prob)?;
                let est = estimator.estimate(&obs, truth.len())?;
                let kl = kl_divergence(&est, truth)?;
                if kl.is_finite() {
                    sum += kl;
                    finite += 1;
                } else {
                    infinite += 1;
                }
            }
            cells.push(KlCell {
                estimator: name.to_string(),
                k,
                rank_size,
                mean_kl: if finite > 0 { sum / finite as f64 } else { f64::NAN },
                finite,
                infinite,
            });
        }
    }
    Ok(cells)
}

pub fn write_kl_csv<W: Write>(cells: &[KlCell], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for cell in cells {
        w.serialize(cell).map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}

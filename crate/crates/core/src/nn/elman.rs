//! Elman recurrent network:
//!
//! ```text
//! a(k) = tanh(IW·p(k) + LW1·a(k−1) + b1)
//! y(k) = LW2·a(k) + b2
//! ```
//!
//! Trained online in time order with the context treated as an extra input
//! (backpropagation truncated to one step).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::MatrixFile;
use super::mlp::glorot;
use super::{NormStats, TrainingSet, INPUTS, OUTPUTS};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElmanConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub divergence_loss: f64,
}

impl Default for ElmanConfig {
    fn default() -> Self {
        Self {
            hidden: 12,
            learning_rate: 0.01,
            epochs: 1000,
            divergence_loss: 1e3,
        }
    }
}

impl ElmanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Config("elman: hidden size and learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElmanModel {
    pub iw: DMatrix<f64>,
    pub lw1: DMatrix<f64>,
    pub lw2: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    pub stats: NormStats,
}

impl ElmanModel {
    pub fn new(hidden: usize, stats: NormStats, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            iw: glorot(hidden, INPUTS, &mut rng),
            lw1: glorot(hidden, hidden, &mut rng) * 0.5,
            lw2: glorot(OUTPUTS, hidden, &mut rng),
            b1: DVector::zeros(hidden),
            b2: DVector::zeros(OUTPUTS),
            stats,
        }
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    pub fn zero_context(&self) -> DVector<f64> {
        DVector::zeros(self.hidden())
    }

    /// Runs the network over time-ordered normalized inputs from a zero context.
    pub fn predict_sequence(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut ctx = self.zero_context();
        let mut y = DMatrix::zeros(x.nrows(), OUTPUTS);
        for r in 0..x.nrows() {
            let p = x.row(r).transpose();
            let (out, next) = elman_forward(self, &p, &ctx);
            y.row_mut(r).copy_from(&out.transpose());
            ctx = next;
        }
        y
    }

    pub fn to_file(&self) -> MatrixFile {
        let mut f = MatrixFile::new("elman");
        f.push("IW", self.iw.clone())
            .push("LW1", self.lw1.clone())
            .push("LW2", self.lw2.clone())
            .push_vector("B1", &self.b1)
            .push_vector("B2", &self.b2)
            .push_stats(&self.stats);
        f
    }

    pub fn from_file(f: &MatrixFile) -> Result<Self> {
        f.expect_kind("elman")?;
        let hidden = f.get_any("B1")?.nrows();
        Ok(Self {
            iw: f.get("IW", hidden, INPUTS)?,
            lw1: f.get("LW1", hidden, hidden)?,
            lw2: f.get("LW2", OUTPUTS, hidden)?,
            b1: f.get_vector("B1", hidden)?,
            b2: f.get_vector("B2", OUTPUTS)?,
            stats: f.get_stats(INPUTS + OUTPUTS)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_file().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(&MatrixFile::load(path)?)
    }
}

/// One step: returns the output and the new context.
pub fn elman_forward(model: &ElmanModel, p: &DVector<f64>, context: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let a = (&model.iw * p + &model.lw1 * context + &model.b1).map(f64::tanh);
    let y = &model.lw2 * &a + &model.b2;
    (y, a)
}

/// Online gradient descent over the full sequence each epoch. Only rows
/// flagged in `train_rows` update the weights, but every row advances the
/// context. Returns the per-epoch mean training loss.
pub fn train_elman(
    model: &ElmanModel,
    data: &TrainingSet,
    train_rows: &[usize],
    cfg: &ElmanConfig,
) -> Result<(ElmanModel, Vec<f64>)> {
    let mut m = model.clone();
    let mut is_train = vec![false; data.len()];
    for &r in train_rows {
        is_train[r] = true;
    }
    let lr = cfg.learning_rate;
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut ctx = m.zero_context();
        let mut total = 0.0;
        for r in 0..data.len() {
            let p = data.inputs.row(r).transpose();
            let (y, a) = elman_forward(&m, &p, &ctx);
            if is_train[r] {
                let e = y - data.targets.row(r).transpose();
                total += e.norm_squared() / OUTPUTS as f64;
                let g_out = e * (2.0 / OUTPUTS as f64);
                let mut g_hidden = m.lw2.transpose() * &g_out;
                g_hidden.zip_apply(&a, |g, v| *g *= 1.0 - v * v);
                m.lw2 -= &g_out * a.transpose() * lr;
                m.b2 -= &g_out * lr;
                m.iw -= &g_hidden * p.transpose() * lr;
                m.lw1 -= &g_hidden * ctx.transpose() * lr;
                m.b1 -= &g_hidden * lr;
            }
            ctx = a;
        }
        let loss = total / train_rows.len().max(1) as f64;
        if !loss.is_finite() || loss > cfg.divergence_loss {
            return Err(Error::Divergence { epoch, loss });
        }
        curve.push(loss);
    }
    Ok((m, curve))
}

//! Single-hidden-layer perceptron, `y = LW·tanh(IW·p + b1) + b2`, trained by
//! full-batch gradient descent on the mean squared error.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::MatrixFile;
use super::{NormStats, TrainingSet, INPUTS, OUTPUTS};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    /// Step size for the input layer.
    pub alpha: f64,
    /// Step size for the output layer.
    pub beta: f64,
    pub max_epochs: usize,
    /// Stop once the normalized MSE reaches this value.
    pub target_mse: f64,
    pub divergence_loss: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 26,
            alpha: 0.1,
            beta: 0.1,
            max_epochs: 5000,
            target_mse: 1e-4,
            divergence_loss: 1e3,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::Config("mlp: hidden size and step sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub iw: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub lw: DMatrix<f64>,
    pub b2: DVector<f64>,
    /// Seven columns: the four inputs then the three outputs.
    pub stats: NormStats,
}

/// Parameter gradients in the same layout as [`MlpModel`].
#[derive(Clone, Debug)]
pub struct MlpGradient {
    pub iw: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub lw: DMatrix<f64>,
    pub b2: DVector<f64>,
}

pub(crate) fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    use rand::Rng;
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

impl MlpModel {
    pub fn new(hidden: usize, stats: NormStats, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            iw: glorot(hidden, INPUTS, &mut rng),
            b1: DVector::zeros(hidden),
            lw: glorot(OUTPUTS, hidden, &mut rng),
            b2: DVector::zeros(OUTPUTS),
            stats,
        }
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    /// Network output for every row of `x` (normalized).
    pub fn forward_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let h = hidden_rows(&self.iw, &self.b1, x);
        let mut y = h * self.lw.transpose();
        for mut row in y.row_iter_mut() {
            row += self.b2.transpose();
        }
        y
    }

    /// Mean squared error over samples and outputs and its gradient.
    pub fn gradient(&self, data: &TrainingSet) -> (f64, MlpGradient) {
        let x = &data.inputs;
        let n = x.nrows();
        let h = hidden_rows(&self.iw, &self.b1, x);
        let mut e = &h * self.lw.transpose();
        for (mut row, target) in e.row_iter_mut().zip(data.targets.row_iter()) {
            row += self.b2.transpose() - target;
        }
        let scale = 1.0 / (n * OUTPUTS) as f64;
        let loss = e.norm_squared() * scale;
        let g_out = e * (2.0 * scale);
        let g_lw = g_out.transpose() * &h;
        let g_b2 = column_sums(&g_out);
        let mut g_hidden = &g_out * &self.lw;
        g_hidden.zip_apply(&h, |g, a| *g *= 1.0 - a * a);
        let g_iw = g_hidden.transpose() * x;
        let g_b1 = column_sums(&g_hidden);
        (
            loss,
            MlpGradient {
                iw: g_iw,
                b1: g_b1,
                lw: g_lw,
                b2: g_b2,
            },
        )
    }

    pub fn loss(&self, data: &TrainingSet) -> f64 {
        (self.forward_rows(&data.inputs) - &data.targets).norm_squared() / (data.len() * OUTPUTS) as f64
    }

    /// Physical-unit prediction for one raw input row.
    pub fn predict(&self, x: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        let p = super::normalize_vec(x, &self.stats.select(0..INPUTS));
        let y = mlp_forward(self, &p);
        let out = super::denormalize_vec(&y, &self.stats.select(INPUTS..INPUTS + OUTPUTS));
        [out[0], out[1], out[2]]
    }

    pub fn to_file(&self) -> MatrixFile {
        let mut f = MatrixFile::new("mlp");
        f.push("IW", self.iw.clone())
            .push_vector("B1", &self.b1)
            .push("LW", self.lw.clone())
            .push_vector("B2", &self.b2)
            .push_stats(&self.stats);
        f
    }

    pub fn from_file(f: &MatrixFile) -> Result<Self> {
        f.expect_kind("mlp")?;
        let hidden = f.get_any("B1")?.nrows();
        Ok(Self {
            iw: f.get("IW", hidden, INPUTS)?,
            b1: f.get_vector("B1", hidden)?,
            lw: f.get("LW", OUTPUTS, hidden)?,
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

fn hidden_rows(iw: &DMatrix<f64>, b1: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut h = x * iw.transpose();
    for mut row in h.row_iter_mut() {
        row += b1.transpose();
    }
    h.apply(|v| *v = v.tanh());
    h
}

fn column_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

/// Output for one normalized input vector.
pub fn mlp_forward(model: &MlpModel, p: &DVector<f64>) -> DVector<f64> {
    let a = (&model.iw * p + &model.b1).map(f64::tanh);
    &model.lw * a + &model.b2
}

/// Batch gradient descent; returns the trained model and the per-epoch loss
/// measured before each update.
pub fn train_mlp(model: &MlpModel, data: &TrainingSet, cfg: &MlpConfig) -> Result<(MlpModel, Vec<f64>)> {
    let mut m = model.clone();
    let mut curve = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let (loss, g) = m.gradient(data);
        if !loss.is_finite() || loss > cfg.divergence_loss {
            return Err(Error::Divergence { epoch, loss });
        }
        curve.push(loss);
        if loss <= cfg.target_mse {
            break;
        }
        m.iw -= g.iw * cfg.alpha;
        m.b1 -= g.b1 * cfg.alpha;
        m.lw -= g.lw * cfg.beta;
        m.b2 -= g.b2 * cfg.beta;
    }
    Ok((m, curve))
}

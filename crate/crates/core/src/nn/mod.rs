//! Engine identification networks.
//!
//! All three models map `[tps, m_fi, n, λ]` at step t to `[Q_eng, n, λ]` at
//! step t+1, working in min/max normalized coordinates in `[-1, 1]`.

pub mod compare;
pub mod data;
pub mod elman;
pub mod io;
pub mod mlp;
pub mod rbf;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use compare::{compare_models, mape, ComparisonReport};
pub use data::{generate_dataset, Dataset, ExcitationConfig};
pub use elman::{ElmanConfig, ElmanModel};
pub use mlp::{MlpConfig, MlpModel};
pub use rbf::{RbfConfig, RbfModel};

use crate::{Error, Result};

pub const INPUTS: usize = 4;
pub const OUTPUTS: usize = 3;

/// Per-column min/max statistics for the affine map onto `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    /// Statistics over the given rows of `data`.
    pub fn from_rows(data: &DMatrix<f64>, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Shape("normalization needs at least one row".into()));
        }
        let cols = data.ncols();
        let mut min = vec![f64::INFINITY; cols];
        let mut max = vec![f64::NEG_INFINITY; cols];
        for &r in rows {
            for c in 0..cols {
                min[c] = min[c].min(data[(r, c)]);
                max[c] = max[c].max(data[(r, c)]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn identity(cols: usize) -> Self {
        Self {
            min: vec![-1.0; cols],
            max: vec![1.0; cols],
        }
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// Half of the column span; a constant column maps with unit scale.
    pub fn half_span(&self, c: usize) -> f64 {
        let h = 0.5 * (self.max[c] - self.min[c]);
        if h > 0.0 {
            h
        } else {
            1.0
        }
    }

    pub fn center(&self, c: usize) -> f64 {
        0.5 * (self.max[c] + self.min[c])
    }

    pub fn normalize_value(&self, c: usize, x: f64) -> f64 {
        (x - self.center(c)) / self.half_span(c)
    }

    pub fn denormalize_value(&self, c: usize, y: f64) -> f64 {
        y * self.half_span(c) + self.center(c)
    }

    pub fn select(&self, cols: std::ops::Range<usize>) -> Self {
        Self {
            min: self.min[cols.clone()].to_vec(),
            max: self.max[cols].to_vec(),
        }
    }
}

/// Column-wise map of `x` onto `[-1, 1]`.
pub fn normalize(x: &DMatrix<f64>, stats: &NormStats) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| stats.normalize_value(c, x[(r, c)]))
}

pub fn denormalize(y: &DMatrix<f64>, stats: &NormStats) -> DMatrix<f64> {
    DMatrix::from_fn(y.nrows(), y.ncols(), |r, c| stats.denormalize_value(c, y[(r, c)]))
}

pub fn normalize_vec(x: &[f64], stats: &NormStats) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().enumerate().map(|(c, &v)| stats.normalize_value(c, v)))
}

pub fn denormalize_vec(y: &DVector<f64>, stats: &NormStats) -> Vec<f64> {
    y.iter().enumerate().map(|(c, &v)| stats.denormalize_value(c, v)).collect()
}

/// Normalized design and target matrices, rows in time order.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn rows(&self, rows: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(rows),
            targets: self.targets.select_rows(rows),
        }
    }
}

/// Hyperparameters for every model plus data generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub sample_count: usize,
    /// Signal-to-noise ratio of the target noise (dB); `inf` disables noise.
    pub snr_db: f64,
    /// Every `validation_stride`-th sample is held out.
    pub validation_stride: usize,
    pub excitation: ExcitationConfig,
    pub mlp: MlpConfig,
    pub elman: ElmanConfig,
    pub rbf: RbfConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            sample_count: 1000,
            snr_db: 5.0,
            validation_stride: 20,
            excitation: ExcitationConfig::default(),
            mlp: MlpConfig::default(),
            elman: ElmanConfig::default(),
            rbf: RbfConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 2 * self.validation_stride.max(1) {
            return Err(Error::Config("training: too few samples for the split".into()));
        }
        if self.validation_stride < 2 {
            return Err(Error::Config("training: validation_stride must be at least 2".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("training: snr_db must be a number".into()));
        }
        self.excitation.validate()?;
        self.mlp.validate()?;
        self.elman.validate()?;
        self.rbf.validate()
    }
}

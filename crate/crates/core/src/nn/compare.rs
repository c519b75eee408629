//! Validation metrics and the three-way model comparison.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::elman::{train_elman, ElmanModel};
use super::mlp::{train_mlp, MlpModel};
use super::rbf::{train_rbf, RbfModel};
use super::{denormalize, Dataset, TrainingConfig, OUTPUTS};
use crate::{Error, Result};

pub const OUTPUT_NAMES: [&str; OUTPUTS] = ["torque", "speed", "afr"];

/// Mean absolute percentage error of each column.
pub fn mape(predictions: &DMatrix<f64>, targets: &DMatrix<f64>) -> Vec<f64> {
    (0..targets.ncols())
        .map(|c| {
            let n = targets.nrows() as f64;
            (0..targets.nrows())
                .map(|r| ((predictions[(r, c)] - targets[(r, c)]) / targets[(r, c)]).abs())
                .sum::<f64>()
                / n
                * 100.0
        })
        .collect()
}

/// Signed proportional error (%) of every entry.
pub fn proportional_errors(predictions: &DMatrix<f64>, targets: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(targets.nrows(), targets.ncols(), |r, c| {
        (predictions[(r, c)] - targets[(r, c)]) / targets[(r, c)] * 100.0
    })
}

#[derive(Clone, Debug)]
pub struct ModelScore {
    pub name: &'static str,
    pub mape: Vec<f64>,
    /// Proportional error per validation sample and output.
    pub errors: DMatrix<f64>,
    pub final_loss: f64,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub scores: Vec<ModelScore>,
    pub mlp: MlpModel,
    pub elman: ElmanModel,
    pub rbf: RbfModel,
    pub validation: Vec<usize>,
}

impl ComparisonReport {
    pub fn score(&self, name: &str) -> Option<&ModelScore> {
        self.scores.iter().find(|s| s.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = String::from("model  torque_mape_%  speed_mape_%  afr_mape_%\n");
        for m in &self.scores {
            let _ = writeln!(s, "{:<6} {:>13.4} {:>13.4} {:>11.4}", m.name, m.mape[0], m.mape[1], m.mape[2]);
        }
        s
    }

    /// One row per validation sample with the signed error of every model.
    pub fn write_errors_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| to_parse(path, e))?;
        let mut header = vec!["sample".to_string()];
        for m in &self.scores {
            for o in OUTPUT_NAMES {
                header.push(format!("{}_{o}_pe", m.name));
            }
        }
        w.write_record(&header).map_err(|e| to_parse(path, e))?;
        for (i, idx) in self.validation.iter().enumerate() {
            let mut row = vec![idx.to_string()];
            for m in &self.scores {
                for c in 0..OUTPUTS {
                    row.push(m.errors[(i, c)].to_string());
                }
            }
            w.write_record(&row).map_err(|e| to_parse(path, e))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn to_parse(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn clean_validation_targets(data: &Dataset) -> DMatrix<f64> {
    let t = data.clean_targets.as_ref().unwrap_or(&data.targets);
    t.select_rows(&data.validation)
}

pub fn score(name: &'static str, predicted_norm: &DMatrix<f64>, data: &Dataset, final_loss: f64) -> ModelScore {
    let pred = denormalize(predicted_norm, &data.target_stats);
    let target = clean_validation_targets(data);
    ModelScore {
        name,
        mape: mape(&pred, &target),
        errors: proportional_errors(&pred, &target),
        final_loss,
    }
}

pub fn fit_mlp(data: &Dataset, cfg: &TrainingConfig, seed: u64) -> Result<(MlpModel, Vec<f64>)> {
    let set = data.normalized();
    let init = MlpModel::new(cfg.mlp.hidden, data.stats(), seed);
    train_mlp(&init, &set.rows(&data.train), &cfg.mlp)
}

pub fn fit_elman(data: &Dataset, cfg: &TrainingConfig, seed: u64) -> Result<(ElmanModel, Vec<f64>)> {
    let set = data.normalized();
    let init = ElmanModel::new(cfg.elman.hidden, data.stats(), seed);
    train_elman(&init, &set, &data.train, &cfg.elman)
}

pub fn score_mlp(m: &MlpModel, data: &Dataset, loss: f64) -> ModelScore {
    let x = data.normalized().inputs.select_rows(&data.validation);
    score("mlp", &m.forward_rows(&x), data, loss)
}

pub fn score_elman(m: &ElmanModel, data: &Dataset, loss: f64) -> ModelScore {
    let all = m.predict_sequence(&data.normalized().inputs);
    score("elman", &all.select_rows(&data.validation), data, loss)
}

pub fn score_rbf(m: &RbfModel, data: &Dataset) -> ModelScore {
    let set = data.normalized();
    let train = set.rows(&data.train);
    let loss = (m.forward_rows(&train.inputs) - &train.targets).norm_squared() / train.targets.len() as f64;
    let x = set.inputs.select_rows(&data.validation);
    score("rbf", &m.forward_rows(&x), data, loss)
}

/// Trains the three networks on the training split as parallel jobs and
/// scores them on the validation split in physical units.
pub fn compare_models(data: &Dataset, cfg: &TrainingConfig, seed: u64) -> Result<ComparisonReport> {
    let (mlp, elman, rbf) = std::thread::scope(|s| {
        let mlp = s.spawn(|| fit_mlp(data, cfg, seed));
        let elman = s.spawn(|| fit_elman(data, cfg, seed.wrapping_add(1)));
        let rbf = s.spawn(|| train_rbf(data, &cfg.rbf, seed.wrapping_add(2)));
        (
            mlp.join().expect("mlp training thread panicked"),
            elman.join().expect("elman training thread panicked"),
            rbf.join().expect("rbf training thread panicked"),
        )
    });
    let (mlp, mlp_curve) = mlp?;
    let (elman, elman_curve) = elman?;
    let rbf = rbf?;
    let scores = vec![
        score_mlp(&mlp, data, mlp_curve.last().copied().unwrap_or(f64::NAN)),
        score_elman(&elman, data, elman_curve.last().copied().unwrap_or(f64::NAN)),
        score_rbf(&rbf, data),
    ];
    Ok(ComparisonReport {
        scores,
        mlp,
        elman,
        rbf,
        validation: data.validation.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mape_cases() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 4.0, 5.0]);
        assert_eq!(mape(&t, &t), vec![0.0, 0.0]);
        let m = mape(&(&t * 1.01), &t);
        assert_relative_eq!(m[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(m[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn proportional_error_sign() {
        let t = DMatrix::from_row_slice(1, 1, &[2.0]);
        let p = DMatrix::from_row_slice(1, 1, &[1.9]);
        assert_relative_eq!(proportional_errors(&p, &t)[(0, 0)], -5.0, max_relative = 1e-12);
    }
}

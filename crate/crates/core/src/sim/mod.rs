//! Configuration, scenario execution, metrics and CSV output.

pub mod config;
pub mod metrics;
pub mod scenario;

use std::path::Path;

pub use config::Config;
pub use metrics::{compute_metrics, relative_error, ErrorStats, Metrics, Segment};
pub use scenario::{run_scenario, ControllerKind, MeasurementNoise, ScenarioConfig, ScenarioRun, TrajectoryRecord};

use crate::nn::rbf::{train_rbf, RbfModel};
use crate::nn::{generate_dataset, Dataset};
use crate::plant::Dfls;
use crate::{Error, Result, SAMPLE_TIME};

pub fn build_plant(cfg: &Config) -> Result<Dfls> {
    Dfls::new(&cfg.plant, &cfg.fan, SAMPLE_TIME)
}

pub fn generate(cfg: &Config, plant: &Dfls, seed: u64) -> Result<Dataset> {
    let t = &cfg.training;
    generate_dataset(plant, t.sample_count, seed, t.snr_db, t.validation_stride, &t.excitation)
}

/// The configured model file, or a fresh RBF fitted to data generated with `seed`.
pub fn load_or_train_rbf(cfg: &Config, plant: &Dfls, seed: u64) -> Result<RbfModel> {
    match &cfg.scenario.model {
        Some(path) => RbfModel::load(path),
        None => train_rbf(&generate(cfg, plant, seed)?, &cfg.training.rbf, seed),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_trajectory_csv(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

/// Plot-ready relative-error series: `step,time,segment,thrust_rel_err,lambda_rel_err`.
pub fn write_error_series_csv(records: &[TrajectoryRecord], sc: &ScenarioConfig, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["step", "time", "segment", "thrust_rel_err", "lambda_rel_err"])
        .map_err(|e| csv_error(path, e))?;
    for r in records {
        let seg = format!("{:?}", metrics::segment(r.step, sc)).to_lowercase();
        w.write_record([
            r.step.to_string(),
            r.time.to_string(),
            seg,
            r.thrust_rel_err.to_string(),
            r.lambda_rel_err.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

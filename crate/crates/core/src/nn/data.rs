//! Identification data: plant excitation, target noise, the fixed
//! train/validation split and CSV persistence.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{normalize, NormStats, TrainingSet, INPUTS, OUTPUTS};
use crate::engine::ControlInput;
use crate::plant::Dfls;
use crate::{Error, Result};

const RESTART_AFTER_STALLS: usize = 20;

pub const CSV_HEADER: [&str; 7] = ["tps", "m_fi", "n", "lambda", "Q_next", "n_next", "lambda_next"];

/// Amplitude-modulated multi-level steps applied to both inputs
/// independently. Each segment draws a modulation depth, then a level for
/// each input within that fraction of its half span around the box center,
/// and holds both for a random number of steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationConfig {
    /// Segment hold in control steps.
    pub hold_min: usize,
    pub hold_max: usize,
    /// Smallest modulation depth; the largest is 1 (full box).
    pub amplitude_min: f64,
    /// Operating point the excitation starts from (rev/s, λ).
    pub initial_speed: f64,
    pub initial_lambda: f64,
    /// Segment draws allowed before generation gives up.
    pub max_attempts: usize,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        Self {
            hold_min: 5,
            hold_max: 30,
            amplitude_min: 0.2,
            initial_speed: 70.0,
            initial_lambda: 1.0,
            max_attempts: 100_000,
        }
    }
}

impl ExcitationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hold_min == 0 || self.hold_min > self.hold_max {
            return Err(Error::Config("excitation: hold range must be positive and ordered".into()));
        }
        if !(0.0..=1.0).contains(&self.amplitude_min) {
            return Err(Error::Config("excitation: amplitude_min must lie in [0, 1]".into()));
        }
        if !(self.initial_speed > 0.0 && self.initial_lambda > 0.0) {
            return Err(Error::Config("excitation: initial operating point must be positive".into()));
        }
        Ok(())
    }
}

/// Input/target pairs in time order. Row k holds `[tps, m_fi, n, λ]` at
/// step k and `[Q_eng, n, λ]` at step k+1.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    /// Targets before noise, when known.
    pub clean_targets: Option<DMatrix<f64>>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub input_stats: NormStats,
    pub target_stats: NormStats,
}

impl Dataset {
    /// Builds the split and training-set statistics for raw data.
    pub fn new(inputs: DMatrix<f64>, targets: DMatrix<f64>, validation_stride: usize) -> Result<Self> {
        if inputs.ncols() != INPUTS || targets.ncols() != OUTPUTS || inputs.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "dataset needs N x {INPUTS} inputs and N x {OUTPUTS} targets, got {}x{} and {}x{}",
                inputs.nrows(),
                inputs.ncols(),
                targets.nrows(),
                targets.ncols()
            )));
        }
        let (train, validation) = split(inputs.nrows(), validation_stride);
        let input_stats = NormStats::from_rows(&inputs, &train)?;
        let target_stats = NormStats::from_rows(&targets, &train)?;
        Ok(Self {
            inputs,
            targets,
            clean_targets: None,
            train,
            validation,
            input_stats,
            target_stats,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// Every row, normalized with the training statistics.
    pub fn normalized(&self) -> TrainingSet {
        TrainingSet {
            inputs: normalize(&self.inputs, &self.input_stats),
            targets: normalize(&self.targets, &self.target_stats),
        }
    }

    /// Statistics of all seven columns, inputs first.
    pub fn stats(&self) -> NormStats {
        NormStats {
            min: [self.input_stats.min.clone(), self.target_stats.min.clone()].concat(),
            max: [self.input_stats.max.clone(), self.target_stats.max.clone()].concat(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
        for r in 0..self.len() {
            let row: Vec<String> = (0..INPUTS)
                .map(|c| self.inputs[(r, c)])
                .chain((0..OUTPUTS).map(|c| self.targets[(r, c)]))
                .map(|v| v.to_string())
                .collect();
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, validation_stride: usize) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header = r.headers().map_err(|e| csv_error(path, e))?;
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("expected header {}", CSV_HEADER.join(",")),
            });
        }
        let mut values = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            if rec.len() != CSV_HEADER.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {} has {} fields", line + 2, rec.len()),
                });
            }
            for field in rec.iter() {
                values.push(field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}: {e}", line + 2),
                })?);
            }
        }
        let n = values.len() / CSV_HEADER.len();
        let all = DMatrix::from_row_slice(n, CSV_HEADER.len(), &values);
        Self::new(
            all.columns(0, INPUTS).into_owned(),
            all.columns(INPUTS, OUTPUTS).into_owned(),
            validation_stride,
        )
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Deterministic split: rows with `k % stride == stride - 1` are validation.
pub fn split(n: usize, stride: usize) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|k| k % stride != stride - 1)
}

/// Adds zero-mean Gaussian noise to the given rows of each column with
/// variance equal to the column variance over those rows divided by
/// 10^(snr/10).
pub fn add_target_noise(targets: &mut DMatrix<f64>, rows: &[usize], snr_db: f64, rng: &mut impl Rng) {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return;
    }
    let ratio = 10f64.powf(snr_db / 10.0);
    for c in 0..targets.ncols() {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| targets[(r, c)]).sum::<f64>() / n;
        let var = rows.iter().map(|&r| (targets[(r, c)] - mean).powi(2)).sum::<f64>() / n;
        let std = (var / ratio).sqrt();
        if !(std > 0.0) {
            continue;
        }
        let dist = Normal::new(0.0, std).expect("finite positive std");
        for &r in rows {
            targets[(r, c)] += dist.sample(rng);
        }
    }
}

/// Excites the coupled plant and records `sample_count` transitions.
pub fn generate_dataset(
    plant: &Dfls,
    sample_count: usize,
    seed: u64,
    snr_db: f64,
    validation_stride: usize,
    excitation: &ExcitationConfig,
) -> Result<Dataset> {
    excitation.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = &plant.bounds;
    let mid = [0.5 * (b.tps_max + b.tps_min), 0.5 * (b.fuel_max + b.fuel_min)];
    let half = [0.5 * (b.tps_max - b.tps_min), 0.5 * (b.fuel_max - b.fuel_min)];

    let start = plant.trim_at_speed(excitation.initial_speed, excitation.initial_lambda)?.state;
    let mut state = start.clone();
    let mut stalls_in_row = 0usize;
    let mut inputs = Vec::with_capacity(sample_count * INPUTS);
    let mut targets = Vec::with_capacity(sample_count * OUTPUTS);
    let mut attempts = 0usize;
    let mut count = 0usize;

    while count < sample_count {
        attempts += 1;
        if attempts > excitation.max_attempts {
            return Err(Error::Infeasible(format!(
                "excitation produced only {count} of {sample_count} samples"
            )));
        }
        let depth = rng.random_range(excitation.amplitude_min..=1.0);
        let level = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        let hold = rng.random_range(excitation.hold_min..=excitation.hold_max);
        let u = b.clamp(ControlInput::new(
            mid[0] + depth * level[0] * half[0],
            mid[1] + depth * level[1] * half[1],
        ));

        let steps = hold.min(sample_count - count);
        let mut s = state.clone();
        let mut segment = Vec::with_capacity(steps);
        let mut stalled = false;
        for _ in 0..steps {
            match plant.step(&s, &u) {
                Ok(next) => {
                    segment.push((s.speed, s.lambda, next.measured()));
                    s = next;
                }
                Err(Error::Stall { .. } | Error::SingularSpeed { .. }) => {
                    stalled = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if stalled {
            // a state that stalls under every draw is abandoned
            stalls_in_row += 1;
            if stalls_in_row >= RESTART_AFTER_STALLS {
                state = start.clone();
                stalls_in_row = 0;
            }
            continue;
        }
        stalls_in_row = 0;
        for (n, l, next) in segment {
            inputs.extend_from_slice(&[u.tps, u.fuel_rate, n, l]);
            targets.extend_from_slice(&next);
        }
        count += steps;
        state = s;
    }

    let inputs = DMatrix::from_row_slice(sample_count, INPUTS, &inputs);
    let clean = DMatrix::from_row_slice(sample_count, OUTPUTS, &targets);
    let (train, _) = split(sample_count, validation_stride);
    let mut noisy = clean.clone();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    add_target_noise(&mut noisy, &train, snr_db, &mut noise_rng);

    let mut data = Dataset::new(inputs, noisy, validation_stride)?;
    data.clean_targets = Some(clean);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fan::FanGeometry;
    use crate::plant::PlantConfig;
    use crate::SAMPLE_TIME;

    fn plant() -> Dfls {
        Dfls::new(&PlantConfig::default(), &FanGeometry::default(), SAMPLE_TIME).unwrap()
    }

    #[test]
    fn split_sizes() {
        let (train, val) = split(1000, 20);
        assert_eq!(train.len(), 950);
        assert_eq!(val.len(), 50);
        assert_eq!(val[0], 19);
    }

    #[test]
    fn infinite_snr_keeps_clean_targets() {
        let d = generate_dataset(&plant(), 120, 3, f64::INFINITY, 20, &ExcitationConfig::default()).unwrap();
        assert_eq!(&d.targets, d.clean_targets.as_ref().unwrap());
    }

    #[test]
    fn same_seed_same_data() {
        let p = plant();
        let cfg = ExcitationConfig::default();
        let a = generate_dataset(&p, 100, 11, 5.0, 20, &cfg).unwrap();
        let b = generate_dataset(&p, 100, 11, 5.0, 20, &cfg).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.targets, b.targets);
        let c = generate_dataset(&p, 100, 12, 5.0, 20, &cfg).unwrap();
        assert_ne!(a.inputs, c.inputs);
    }

    #[test]
    fn inputs_respect_the_box_and_rows_chain() {
        let p = plant();
        let d = generate_dataset(&p, 300, 5, f64::INFINITY, 20, &ExcitationConfig::default()).unwrap();
        for r in 0..d.len() {
            let u = ControlInput::new(d.inputs[(r, 0)], d.inputs[(r, 1)]);
            assert!(p.bounds.contains(&u));
        }
        // next-state columns feed the following row's state inputs except
        // after the rare restart from the initial trim
        let clean = d.clean_targets.as_ref().unwrap();
        let breaks = (0..d.len() - 1)
            .filter(|&r| clean[(r, 1)] != d.inputs[(r + 1, 2)] || clean[(r, 2)] != d.inputs[(r + 1, 3)])
            .count();
        assert!(breaks <= 3, "{breaks} breaks");
    }

    #[test]
    fn empirical_snr_matches_request() {
        let d = generate_dataset(&plant(), 1000, 9, 5.0, 20, &ExcitationConfig::default()).unwrap();
        let clean = d.clean_targets.as_ref().unwrap();
        for c in 0..OUTPUTS {
            let sig: Vec<f64> = d.train.iter().map(|&r| clean[(r, c)]).collect();
            let noise: Vec<f64> = d.train.iter().map(|&r| d.targets[(r, c)] - clean[(r, c)]).collect();
            let var = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
            };
            let snr = 10.0 * (var(&sig) / var(&noise)).log10();
            assert!((snr - 5.0).abs() <= 0.5, "column {c}: {snr} dB");
            for &r in &d.validation {
                assert_eq!(d.targets[(r, c)], clean[(r, c)]);
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = generate_dataset(&plant(), 60, 2, 5.0, 20, &ExcitationConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        d.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path, 20).unwrap();
        assert_eq!(back.inputs, d.inputs);
        assert_eq!(back.targets, d.targets);
        assert_eq!(back.input_stats, d.input_stats);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(Dataset::read_csv(&path, 20), Err(Error::Parse { .. })));
    }
}

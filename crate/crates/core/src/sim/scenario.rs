//! Takeoff thrust-preparation scenario: references, measurement noise and
//! the closed loop.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::metrics::{compute_metrics, relative_error, Metrics};
use crate::engine::ControlInput;
use crate::mpc::{Controller, Measurement, Model, MpcConfig};
use crate::nn::rbf::RbfModel;
use crate::plant::Dfls;
use crate::{kgf_to_newton, newton_to_kgf, Error, Result, SAMPLE_TIME};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub steps: usize,
    pub thrust_initial_kgf: f64,
    pub thrust_final_kgf: f64,
    /// Thrust ramps linearly from `ramp_start` to `ramp_end` (steps).
    pub ramp_start: usize,
    pub ramp_end: usize,
    pub lambda_initial: f64,
    pub lambda_final: f64,
    /// First step with the final λ reference.
    pub lambda_switch: usize,
    /// Steps after the ramp end and the λ switch left out of steady metrics.
    pub settle_steps: usize,
    /// Measurement noise std in normalized units (fraction of half-span).
    pub noise_std: f64,
    /// Half-spans that turn normalized noise into physical units.
    pub thrust_half_span_kgf: f64,
    pub lambda_half_span: f64,
    pub seed: u64,
    /// Trained RBF model; trained on the fly from `[training]` when absent.
    pub model: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            steps: 250,
            thrust_initial_kgf: 10.0,
            thrust_final_kgf: 80.0,
            ramp_start: 10,
            ramp_end: 100,
            lambda_initial: 0.82,
            lambda_final: 1.0,
            lambda_switch: 150,
            settle_steps: 20,
            noise_std: 0.005,
            thrust_half_span_kgf: 75.0,
            lambda_half_span: 0.29,
            seed: 7,
            model: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self, mpc: &MpcConfig) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scenario: {m}")));
        if self.steps == 0 || self.ramp_start > self.ramp_end {
            return bad("need steps > 0 and ramp_start <= ramp_end");
        }
        let t_ok = |t: f64| (mpc.thrust_min_kgf..=mpc.thrust_max_kgf).contains(&t);
        let l_ok = |l: f64| (mpc.lambda_min..=mpc.lambda_max).contains(&l);
        if !(t_ok(self.thrust_initial_kgf) && t_ok(self.thrust_final_kgf)) {
            return bad("thrust references leave the output bounds");
        }
        if !(l_ok(self.lambda_initial) && l_ok(self.lambda_final)) {
            return bad("lambda references leave the output bounds");
        }
        if !(self.noise_std >= 0.0 && self.thrust_half_span_kgf >= 0.0 && self.lambda_half_span >= 0.0) {
            return bad("noise settings must be non-negative");
        }
        Ok(())
    }

    /// `(T_ref (kgf), λ_ref)` at step `k`; held at the last value past the end.
    pub fn reference(&self, k: usize) -> (f64, f64) {
        let (t0, t1) = (self.thrust_initial_kgf, self.thrust_final_kgf);
        let thrust = if k <= self.ramp_start {
            t0
        } else if k >= self.ramp_end {
            t1
        } else {
            t0 + (t1 - t0) * (k - self.ramp_start) as f64 / (self.ramp_end - self.ramp_start) as f64
        };
        let lambda = if k < self.lambda_switch { self.lambda_initial } else { self.lambda_final };
        (thrust, lambda)
    }

    /// `[T_ref (N), λ_ref]` for `j = 1..=n2` ahead of step `k`.
    pub fn preview(&self, k: usize, n2: usize) -> Vec<Vector2<f64>> {
        (1..=n2)
            .map(|j| {
                let (t, l) = self.reference(k + j);
                Vector2::new(kgf_to_newton(t), l)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerKind {
    Ampc,
    LinearMpc,
    OpenLoop,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Ampc => "ampc",
            ControllerKind::LinearMpc => "linear-mpc",
            ControllerKind::OpenLoop => "open-loop",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ampc" => Ok(ControllerKind::Ampc),
            "linear-mpc" => Ok(ControllerKind::LinearMpc),
            "open-loop" => Ok(ControllerKind::OpenLoop),
            _ => Err(Error::Config(format!("unknown controller kind {s:?}"))),
        }
    }
}

/// Gaussian measurement noise in normalized units, scaled per channel.
/// Draw order per step: thrust, λ, torque, speed.
#[derive(Clone, Debug)]
pub struct MeasurementNoise {
    dist: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    /// Half-spans `[T (N), λ, Q_eng, n]`.
    pub scales: [f64; 4],
}

impl MeasurementNoise {
    pub fn new(std: f64, scales: [f64; 4], seed: u64) -> Result<Self> {
        let dist = if std > 0.0 {
            Some(Normal::new(0.0, std).map_err(|e| Error::Config(format!("noise: {e}")))?)
        } else {
            None
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        Ok(Self { dist, rng, scales })
    }

    /// Normalized draws for one step.
    pub fn draw(&mut self) -> [f64; 4] {
        match &self.dist {
            Some(d) => std::array::from_fn(|_| d.sample(&mut self.rng)),
            None => [0.0; 4],
        }
    }
}

/// One control step. Thrust columns are in kgf; errors in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub time: f64,
    pub thrust_ref_kgf: f64,
    pub lambda_ref: f64,
    pub thrust_kgf: f64,
    pub lambda: f64,
    pub thrust_meas_kgf: f64,
    pub lambda_meas: f64,
    pub torque_meas: f64,
    pub speed_meas: f64,
    pub tps: f64,
    pub fuel_rate: f64,
    pub torque: f64,
    pub speed: f64,
    pub manifold_pressure: f64,
    pub cost: f64,
    pub cost_hold: f64,
    pub iterations: usize,
    pub converged: bool,
    pub held: bool,
    /// Bit `2k + i` set when input `i` of horizon step `k` sits on a bound.
    pub active: u32,
    pub thrust_rel_err: f64,
    pub lambda_rel_err: f64,
    pub noise_thrust: f64,
    pub noise_lambda: f64,
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub kind: ControllerKind,
    pub records: Vec<TrajectoryRecord>,
    pub metrics: Metrics,
    /// Plant or solver failure that cut the run short.
    pub failure: Option<Error>,
}

struct StepInfo {
    cost: f64,
    cost_hold: f64,
    iterations: usize,
    converged: bool,
    held: bool,
    active: u32,
}

impl StepInfo {
    fn open_loop() -> Self {
        Self {
            cost: 0.0,
            cost_hold: 0.0,
            iterations: 0,
            converged: true,
            held: false,
            active: 0,
        }
    }
}

/// Runs the scenario on `plant`. The MPC kinds need `rbf`.
pub fn run_scenario(cfg: &Config, plant: &Dfls, rbf: Option<&RbfModel>, kind: ControllerKind) -> Result<ScenarioRun> {
    let sc = &cfg.scenario;
    let (t0, l0) = sc.reference(0);
    let trim = plant.trim(kgf_to_newton(t0), l0)?;
    let mut state = trim.state;
    let mut u = plant.bounds.clamp(trim.input);

    let mut controller = match kind {
        ControllerKind::OpenLoop => None,
        _ => {
            let rbf = rbf.ok_or_else(|| Error::Config(format!("{kind} needs a trained RBF model")))?.clone();
            let fan = plant.fan.clone();
            let model = if kind == ControllerKind::Ampc {
                Model::Adaptive { rbf, fan }
            } else {
                Model::Frozen { rbf, fan, lpv: None }
            };
            Some(Controller::new(cfg.mpc.clone(), model, u)?)
        }
    };
    let out_stats = rbf.map(|m| m.output_stats());
    let scales = [
        kgf_to_newton(sc.thrust_half_span_kgf),
        sc.lambda_half_span,
        out_stats.as_ref().map_or(0.0, |s| s.half_span(0)),
        out_stats.as_ref().map_or(0.0, |s| s.half_span(1)),
    ];
    let mut noise = MeasurementNoise::new(sc.noise_std, scales, sc.seed)?;

    let mut records = Vec::with_capacity(sc.steps);
    let mut failure = None;
    for k in 0..sc.steps {
        let time = k as f64 * SAMPLE_TIME;
        let [thrust, lambda] = plant.outputs(&state);
        let z = noise.draw();
        let meas = Measurement {
            state: [state.torque + z[2] * scales[2], state.speed + z[3] * scales[3], lambda + z[1] * scales[1]],
            outputs: [thrust + z[0] * scales[0], lambda + z[1] * scales[1]],
        };
        let info = match controller.as_mut() {
            Some(c) => match c.step(&meas, &sc.preview(k, cfg.mpc.n2), time) {
                Ok(r) => {
                    u = r.input;
                    let active = r.solution.active.iter().enumerate().fold(0u32, |m, (i, a)| m | (u32::from(*a) << i));
                    StepInfo {
                        cost: r.solution.cost,
                        cost_hold: r.solution.cost_hold,
                        iterations: r.solution.iterations,
                        converged: r.solution.converged,
                        held: r.solution.held,
                        active,
                    }
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            },
            None => {
                let (t, l) = sc.reference(k + 1);
                if let Ok(tr) = plant.trim(kgf_to_newton(t), l) {
                    u = plant.bounds.clamp(tr.input);
                }
                StepInfo::open_loop()
            }
        };
        let (t_ref, l_ref) = sc.reference(k);
        let thrust_kgf = newton_to_kgf(thrust);
        records.push(TrajectoryRecord {
            step: k,
            time,
            thrust_ref_kgf: t_ref,
            lambda_ref: l_ref,
            thrust_kgf,
            lambda,
            thrust_meas_kgf: newton_to_kgf(meas.outputs[0]),
            lambda_meas: meas.outputs[1],
            torque_meas: meas.state[0],
            speed_meas: meas.state[1],
            tps: u.tps,
            fuel_rate: u.fuel_rate,
            torque: state.torque,
            speed: state.speed,
            manifold_pressure: state.manifold_pressure,
            cost: info.cost,
            cost_hold: info.cost_hold,
            iterations: info.iterations,
            converged: info.converged,
            held: info.held,
            active: info.active,
            thrust_rel_err: relative_error(thrust_kgf, t_ref),
            lambda_rel_err: relative_error(lambda, l_ref),
            noise_thrust: z[0],
            noise_lambda: z[1],
        });
        match plant.step(&state, &u) {
            Ok(next) => state = next,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let metrics = compute_metrics(&records, sc, &plant.bounds);
    Ok(ScenarioRun {
        kind,
        records,
        metrics,
        failure,
    })
}

/// The first input of an MPC step is the only one that reaches the plant.
pub fn applied_input(r: &TrajectoryRecord) -> ControlInput {
    ControlInput::new(r.tps, r.fuel_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_profile() {
        let s = ScenarioConfig::default();
        assert_eq!(s.reference(0), (10.0, 0.82));
        assert_eq!(s.reference(10), (10.0, 0.82));
        assert_eq!(s.reference(55), (45.0, 0.82));
        assert_eq!(s.reference(100), (80.0, 0.82));
        assert_eq!(s.reference(149).1, 0.82);
        assert_eq!(s.reference(150), (80.0, 1.0));
        assert_eq!(s.reference(10_000), (80.0, 1.0));
    }

    #[test]
    fn preview_starts_one_step_ahead() {
        let s = ScenarioConfig::default();
        let p = s.preview(149, 8);
        assert_eq!(p.len(), 8);
        assert!(p.iter().all(|r| r[1] == 1.0));
        assert_eq!(p[0][0], kgf_to_newton(80.0));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [ControllerKind::Ampc, ControllerKind::LinearMpc, ControllerKind::OpenLoop] {
            assert_eq!(k.name().parse::<ControllerKind>().unwrap(), k);
        }
        assert!("mpc".parse::<ControllerKind>().is_err());
    }

    #[test]
    fn noise_audit() {
        let mut n = MeasurementNoise::new(0.005, [1.0; 4], 7).unwrap();
        let draws: Vec<[f64; 4]> = (0..1000).map(|_| n.draw()).collect();
        for c in 0..2 {
            let m = draws.iter().map(|d| d[c]).sum::<f64>() / 1000.0;
            let v = draws.iter().map(|d| (d[c] - m).powi(2)).sum::<f64>() / 999.0;
            assert!((v / 0.005f64.powi(2) - 1.0).abs() <= 0.1, "{v}");
        }
    }

    #[test]
    fn zero_std_is_silent() {
        let mut n = MeasurementNoise::new(0.0, [1.0; 4], 7).unwrap();
        assert_eq!(n.draw(), [0.0; 4]);
    }
}

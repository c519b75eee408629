//! Receding-horizon controller over the per-step LPV model.
//!
//! Prediction runs in increment form: with `δx(k) = x(k) − x(k−1)` and
//! `δu(k) = u(k) − u(k−1)`,
//!
//! ```text
//! δx(k+1) = A·δx(k) + B·δu(k),   ŷ(j) = y0 + C·Σ_{i=1..j} δx(i)
//! ```
//!
//! so a constant input leaves a settled output where it is. The QP works on
//! the scaled input offsets `v_k = (u(t+k) − u_prev)/s`, which turns the
//! input box into simple bounds.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::qp::{solve_box_qp, BoxQp, QpOptions};
use crate::engine::{ControlInput, InputBounds};
use crate::fan::FanModel;
use crate::lpv::{build_lpv, LpvModel};
use crate::nn::rbf::RbfModel;
use crate::{kgf_to_newton, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub n1: usize,
    pub n2: usize,
    pub nc: usize,
    pub epsilon: f64,
    pub xi: f64,
    pub inputs: InputBounds,
    pub thrust_min_kgf: f64,
    pub thrust_max_kgf: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub thrust_scale_kgf: f64,
    pub lambda_scale: f64,
    pub tps_scale: f64,
    pub fuel_scale: f64,
    /// Soft output-limit weight as a multiple of ε.
    pub soft_penalty: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            n1: 1,
            n2: 8,
            nc: 3,
            epsilon: 0.8,
            xi: 0.5,
            inputs: InputBounds::default(),
            thrust_min_kgf: 0.0,
            thrust_max_kgf: 150.0,
            lambda_min: 0.68,
            lambda_max: 1.26,
            max_iterations: 500,
            tolerance: 1e-8,
            thrust_scale_kgf: 150.0,
            lambda_scale: 0.58,
            tps_scale: 85.0,
            fuel_scale: 0.0044,
            soft_penalty: 1e3,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("mpc: {m}")));
        if !(1 <= self.n1 && self.n1 <= self.n2) {
            return bad("need 1 <= n1 <= n2");
        }
        if !(1 <= self.nc && self.nc <= self.n2) {
            return bad("need 1 <= nc <= n2");
        }
        if !(self.epsilon > 0.0 && self.xi > 0.0) {
            return bad("epsilon and xi must be positive");
        }
        if !(self.thrust_min_kgf < self.thrust_max_kgf && self.lambda_min < self.lambda_max) {
            return bad("output bounds must be ordered");
        }
        let scales = [self.thrust_scale_kgf, self.lambda_scale, self.tps_scale, self.fuel_scale];
        if scales.iter().any(|s| !(*s > 0.0)) {
            return bad("scales must be positive");
        }
        if self.max_iterations == 0 || !(self.tolerance > 0.0) || !(self.soft_penalty >= 0.0) {
            return bad("solver settings must be positive");
        }
        self.inputs.validate()
    }

    /// Output scales `[thrust (N), λ]`.
    pub fn output_scale(&self) -> Vector2<f64> {
        Vector2::new(kgf_to_newton(self.thrust_scale_kgf), self.lambda_scale)
    }

    pub fn input_scale(&self) -> Vector2<f64> {
        Vector2::new(self.tps_scale, self.fuel_scale)
    }

    pub fn output_lower(&self) -> Vector2<f64> {
        Vector2::new(kgf_to_newton(self.thrust_min_kgf), self.lambda_min)
    }

    pub fn output_upper(&self) -> Vector2<f64> {
        Vector2::new(kgf_to_newton(self.thrust_max_kgf), self.lambda_max)
    }

    fn qp_options(&self) -> QpOptions {
        QpOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }
}

/// Controller-side view of the plant at one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    /// `[Q_eng, n, λ]`
    pub state: [f64; 3],
    /// `[T_DF (N), λ]`
    pub outputs: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonSolution {
    /// Absolute inputs over the control horizon; only the first is applied.
    pub inputs: Vec<ControlInput>,
    /// `ŷ(t+j)` for `j = 1..=N2`.
    pub predicted: Vec<Vector2<f64>>,
    /// Achieved objective including any soft output penalty.
    pub cost: f64,
    /// Objective with the inputs held at `u_prev`.
    pub cost_hold: f64,
    pub iterations: usize,
    /// Per decision variable (step-major, tps then fuel): on a bound.
    pub active: Vec<bool>,
    pub converged: bool,
    /// The QP result did not improve on holding the input, which was used.
    pub held: bool,
}

/// Free plus forced response over `n2` steps; `du_seq` holds the input
/// increments, zero beyond its length.
pub fn predict_horizon(lpv: &LpvModel, dx0: &Vector3<f64>, y0: &Vector2<f64>, du_seq: &[Vector2<f64>], n2: usize) -> Vec<Vector2<f64>> {
    let mut dx = *dx0;
    let mut y = *y0;
    let mut out = Vec::with_capacity(n2);
    for k in 0..n2 {
        let du = du_seq.get(k).copied().unwrap_or_else(Vector2::zeros);
        dx = lpv.a * dx + lpv.b * du;
        y += lpv.c * dx;
        out.push(y);
    }
    out
}

/// Tracking plus move cost with every channel divided by its scale.
/// `refs` and `predicted` are indexed by `j − 1` for `j = 1..=N2`.
pub fn cost(cfg: &MpcConfig, refs: &[Vector2<f64>], predicted: &[Vector2<f64>], du_seq: &[Vector2<f64>]) -> f64 {
    let ys = cfg.output_scale();
    let us = cfg.input_scale();
    let track: f64 = (cfg.n1..=cfg.n2)
        .map(|j| (refs[j - 1] - predicted[j - 1]).component_div(&ys).norm_squared())
        .sum();
    let moves: f64 = du_seq.iter().take(cfg.nc).map(|d| d.component_div(&us).norm_squared()).sum();
    cfg.epsilon * track + cfg.xi * moves
}

/// Quadratic penalty on predicted outputs outside their limits.
pub fn output_penalty(cfg: &MpcConfig, predicted: &[Vector2<f64>]) -> f64 {
    let ys = cfg.output_scale();
    let (lo, hi) = (cfg.output_lower(), cfg.output_upper());
    let rho = cfg.soft_penalty * cfg.epsilon;
    predicted
        .iter()
        .map(|y| {
            (0..2)
                .map(|c| {
                    let v = (y[c] - hi[c]).max(lo[c] - y[c]).max(0.0) / ys[c];
                    v * v
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        * rho
}

fn increments(cfg: &MpcConfig, v: &DVector<f64>) -> Vec<Vector2<f64>> {
    let s = cfg.input_scale();
    (0..cfg.nc)
        .map(|k| {
            let cur = Vector2::new(v[2 * k], v[2 * k + 1]);
            let prev = if k == 0 { Vector2::zeros() } else { Vector2::new(v[2 * k - 2], v[2 * k - 1]) };
            (cur - prev).component_mul(&s)
        })
        .collect()
}

/// Minimizes the scaled tracking cost over the control horizon under the
/// input box, with output limits as soft penalties.
pub fn solve_qp(
    lpv: &LpvModel,
    dx0: &Vector3<f64>,
    y0: &Vector2<f64>,
    refs: &[Vector2<f64>],
    u_prev: &ControlInput,
    cfg: &MpcConfig,
) -> Result<HorizonSolution> {
    if refs.len() < cfg.n2 {
        return Err(Error::Shape(format!("{} references for a horizon of {}", refs.len(), cfg.n2)));
    }
    let nv = 2 * cfg.nc;
    let ys = cfg.output_scale();
    let w = Vector2::new(1.0 / (ys[0] * ys[0]), 1.0 / (ys[1] * ys[1]));
    let predict = |v: &DVector<f64>| predict_horizon(lpv, dx0, y0, &increments(cfg, v), cfg.n2);
    let objective = |v: &DVector<f64>| {
        let p = predict(v);
        cost(cfg, refs, &p, &increments(cfg, v)) + output_penalty(cfg, &p)
    };

    let zero = DVector::zeros(nv);
    let free = predict(&zero);
    // Θ[j][c][i] = ∂ŷ_c(j)/∂v_i
    let theta: Vec<DMatrix<f64>> = {
        let cols: Vec<Vec<Vector2<f64>>> = (0..nv)
            .map(|i| {
                let mut e = zero.clone();
                e[i] = 1.0;
                predict(&e).iter().zip(&free).map(|(a, b)| a - b).collect()
            })
            .collect();
        (0..cfg.n2).map(|j| DMatrix::from_fn(2, nv, |c, i| cols[i][j][c])).collect()
    };

    // ξ·|L v|² with L the first-difference operator on each channel
    let mut l = DMatrix::<f64>::zeros(nv, nv);
    for i in 0..nv {
        l[(i, i)] = 1.0;
        if i >= 2 {
            l[(i, i - 2)] = -1.0;
        }
    }
    let mut h0 = l.transpose() * &l * (2.0 * cfg.xi);
    let mut f0 = DVector::<f64>::zeros(nv);
    for j in cfg.n1..=cfg.n2 {
        let t = &theta[j - 1];
        let e = refs[j - 1] - free[j - 1];
        for c in 0..2 {
            let row = t.row(c);
            h0 += row.transpose() * row * (2.0 * cfg.epsilon * w[c]);
            f0 -= row.transpose() * (2.0 * cfg.epsilon * w[c] * e[c]);
        }
    }

    let s = cfg.input_scale();
    let (lo_u, hi_u) = (cfg.inputs.lower(), cfg.inputs.upper());
    let u = u_prev.to_array();
    let lower = DVector::from_fn(nv, |i, _| ((lo_u[i % 2] - u[i % 2]) / s[i % 2]).min(0.0));
    let upper = DVector::from_fn(nv, |i, _| ((hi_u[i % 2] - u[i % 2]) / s[i % 2]).max(0.0));

    // Outer loop on the set of violated output limits.
    let rho = cfg.soft_penalty * cfg.epsilon;
    let (ylo, yhi) = (cfg.output_lower(), cfg.output_upper());
    let violated = |p: &[Vector2<f64>]| -> Vec<(usize, usize, f64)> {
        let mut set = Vec::new();
        for (j, y) in p.iter().enumerate() {
            for c in 0..2 {
                if y[c] > yhi[c] {
                    set.push((j, c, yhi[c]));
                } else if y[c] < ylo[c] {
                    set.push((j, c, ylo[c]));
                }
            }
        }
        set
    };
    let mut set = violated(&free);
    let mut iterations = 0;
    let mut sol;
    let mut rounds = 0;
    loop {
        let mut h = h0.clone();
        let mut f = f0.clone();
        for &(j, c, b) in &set {
            let row = theta[j].row(c);
            h += row.transpose() * row * (2.0 * rho * w[c]);
            f += row.transpose() * (2.0 * rho * w[c] * (free[j][c] - b));
        }
        let qp = BoxQp {
            h: (&h + h.transpose()) * 0.5,
            f,
            lower: lower.clone(),
            upper: upper.clone(),
        };
        sol = solve_box_qp(&qp, &cfg.qp_options())?;
        iterations += sol.iterations;
        rounds += 1;
        let next = violated(&predict(&sol.x));
        let mut merged = set.clone();
        for item in next {
            if !merged.iter().any(|(j, c, _)| (*j, *c) == (item.0, item.1)) {
                merged.push(item);
            }
        }
        if merged.len() == set.len() || rounds >= 20 {
            break;
        }
        set = merged;
    }

    let cost_hold = objective(&zero);
    let mut v = sol.x.clone();
    let mut achieved = objective(&v);
    let held = !(achieved <= cost_hold);
    if held {
        v = zero;
        achieved = cost_hold;
    }
    let inputs = (0..cfg.nc)
        .map(|k| cfg.inputs.clamp(ControlInput::new(u[0] + v[2 * k] * s[0], u[1] + v[2 * k + 1] * s[1])))
        .collect();
    if !achieved.is_finite() {
        return Err(Error::Solver(format!("non-finite MPC cost {achieved}")));
    }
    Ok(HorizonSolution {
        inputs,
        predicted: predict(&v),
        cost: achieved,
        cost_hold,
        iterations,
        active: if held { vec![false; nv] } else { sol.active() },
        converged: sol.converged,
        held,
    })
}

fn state_increment(meas: &Measurement, prev_state: Option<[f64; 3]>) -> Vector3<f64> {
    match prev_state {
        Some(p) => Vector3::from(meas.state) - Vector3::from(p),
        None => Vector3::zeros(),
    }
}

fn apply(cfg: &MpcConfig, sol: &HorizonSolution) -> ControlInput {
    cfg.inputs.clamp(sol.inputs[0])
}

/// One adaptive step: linearize the identified model at the measured point,
/// solve, and return the first input of the optimal sequence.
#[allow(clippy::too_many_arguments)]
pub fn ampc_step(
    meas: &Measurement,
    prev_state: Option<[f64; 3]>,
    refs: &[Vector2<f64>],
    rbf: &RbfModel,
    fan: &impl FanModel,
    cfg: &MpcConfig,
    u_prev: &ControlInput,
    time: f64,
) -> Result<(ControlInput, HorizonSolution, LpvModel)> {
    let lpv = build_lpv(rbf, fan, meas.state, *u_prev, time)?;
    let sol = solve_qp(&lpv, &state_increment(meas, prev_state), &Vector2::from(meas.outputs), refs, u_prev, cfg)?;
    Ok((apply(cfg, &sol), sol, lpv))
}

/// Same optimization over a model frozen for the whole run.
pub fn linear_mpc_step(
    fixed: &LpvModel,
    meas: &Measurement,
    prev_state: Option<[f64; 3]>,
    refs: &[Vector2<f64>],
    cfg: &MpcConfig,
    u_prev: &ControlInput,
) -> Result<(ControlInput, HorizonSolution)> {
    let sol = solve_qp(fixed, &state_increment(meas, prev_state), &Vector2::from(meas.outputs), refs, u_prev, cfg)?;
    Ok((apply(cfg, &sol), sol))
}

#[derive(Clone, Debug)]
pub enum Model<F: FanModel> {
    /// Relinearized at every sample.
    Adaptive { rbf: RbfModel, fan: F },
    /// Linearized once, at the first sample.
    Frozen { rbf: RbfModel, fan: F, lpv: Option<LpvModel> },
}

/// Stateful wrapper holding the previous measurement and applied input.
#[derive(Clone, Debug)]
pub struct Controller<F: FanModel> {
    pub config: MpcConfig,
    pub model: Model<F>,
    prev_state: Option<[f64; 3]>,
    u_prev: ControlInput,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub input: ControlInput,
    pub solution: HorizonSolution,
    pub lpv: LpvModel,
}

impl<F: FanModel> Controller<F> {
    pub fn new(config: MpcConfig, model: Model<F>, u_initial: ControlInput) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            u_prev: config.inputs.clamp(u_initial),
            config,
            model,
            prev_state: None,
        })
    }

    pub fn last_input(&self) -> ControlInput {
        self.u_prev
    }

    pub fn step(&mut self, meas: &Measurement, refs: &[Vector2<f64>], time: f64) -> Result<StepResult> {
        let (input, solution, lpv) = match &mut self.model {
            Model::Adaptive { rbf, fan } => ampc_step(meas, self.prev_state, refs, rbf, fan, &self.config, &self.u_prev, time)?,
            Model::Frozen { rbf, fan, lpv } => {
                if lpv.is_none() {
                    *lpv = Some(build_lpv(rbf, fan, meas.state, self.u_prev, time)?);
                }
                let fixed = lpv.as_ref().expect("frozen model set above");
                let (input, solution) = linear_mpc_step(fixed, meas, self.prev_state, refs, &self.config, &self.u_prev)?;
                (input, solution, fixed.clone())
            }
        };
        self.prev_state = Some(meas.state);
        self.u_prev = input;
        Ok(StepResult { input, solution, lpv })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2};
    use proptest::prelude::*;

    fn toy() -> LpvModel {
        LpvModel {
            a: Matrix3::new(0.0, 0.3, 0.01, 0.0, 0.8, 0.2, 0.0, -0.05, 0.1),
            b: Matrix3x2::new(0.2, 2000.0, 0.3, 800.0, -0.004, 150.0),
            c: Matrix2x3::new(2.0, 1.5, 0.0, 0.0, 0.0, 1.0),
            d: Matrix2::zeros(),
            x0: [15.0, 70.0, 0.9],
            u0: ControlInput::new(40.0, 0.003),
            time: 0.0,
        }
    }

    fn flat_refs(y: Vector2<f64>, n: usize) -> Vec<Vector2<f64>> {
        vec![y; n]
    }

    #[test]
    fn zero_increments_hold_outputs() {
        let y0 = Vector2::new(300.0, 0.9);
        let p = predict_horizon(&toy(), &Vector3::zeros(), &y0, &[Vector2::zeros(); 3], 8);
        assert!(p.iter().all(|y| *y == y0));
    }

    #[test]
    fn single_move_matches_matrix_powers() {
        let m = toy();
        let du = Vector2::new(1.5, -2e-4);
        let p = predict_horizon(&m, &Vector3::zeros(), &Vector2::zeros(), &[du], 8);
        // ŷ(j) = C·Σ_{i=1..j} A^(i−1)·B·δu
        let mut acc = Vector3::zeros();
        let mut a_pow = Matrix3::identity();
        for y in p {
            acc += a_pow * m.b * du;
            a_pow *= m.a;
            let oracle = m.c * acc;
            assert!((y - oracle).amax() <= 1e-12 * (1.0 + oracle.amax()));
        }
    }

    #[test]
    fn prediction_superposes() {
        let m = toy();
        let y0 = Vector2::new(200.0, 0.85);
        let dx0 = Vector3::new(0.1, -0.4, 0.002);
        let a = [Vector2::new(1.0, 1e-4), Vector2::new(-0.5, 0.0)];
        let b = [Vector2::new(0.0, -2e-4), Vector2::new(2.0, 1e-4)];
        let sum = [a[0] + b[0], a[1] + b[1]];
        let base = predict_horizon(&m, &dx0, &y0, &[], 8);
        let pa = predict_horizon(&m, &dx0, &y0, &a, 8);
        let pb = predict_horizon(&m, &dx0, &y0, &b, 8);
        let ps = predict_horizon(&m, &dx0, &y0, &sum, 8);
        for j in 0..8 {
            assert!((ps[j] - (pa[j] + pb[j] - base[j])).amax() < 1e-9);
        }
    }

    #[test]
    fn cost_cases() {
        let cfg = MpcConfig::default();
        let refs = flat_refs(Vector2::new(500.0, 0.9), 8);
        assert_eq!(cost(&cfg, &refs, &refs, &[Vector2::zeros(); 3]), 0.0);
        let off: Vec<_> = refs.iter().map(|r| r + Vector2::new(10.0, 0.01)).collect();
        let off2: Vec<_> = refs.iter().map(|r| r + Vector2::new(20.0, 0.02)).collect();
        let z1 = cost(&cfg, &refs, &off, &[]);
        assert_relative_eq!(cost(&cfg, &refs, &off2, &[]), 4.0 * z1, max_relative = 1e-12);
    }

    #[test]
    fn two_step_hand_cost() {
        // N1 = 1, N2 = 2, Nc = 1; scales 1 everywhere except thrust 1 kgf.
        //   track = (1/1)² + (0.1)² + (2/1)² + (0.2)² = 5.05  (thrust errors in kgf)
        //   moves = 0.5² + 0.25² = 0.3125
        //   Z = 0.8·5.05 + 0.5·0.3125 = 4.19625
        let cfg = MpcConfig {
            n2: 2,
            nc: 1,
            thrust_scale_kgf: 1.0,
            lambda_scale: 1.0,
            tps_scale: 1.0,
            fuel_scale: 1.0,
            ..MpcConfig::default()
        };
        let g = kgf_to_newton(1.0);
        let refs = [Vector2::new(0.0, 0.0), Vector2::new(0.0, 0.0)];
        let pred = [Vector2::new(g, 0.1), Vector2::new(-2.0 * g, 0.2)];
        let z = cost(&cfg, &refs, &pred, &[Vector2::new(0.5, 0.25)]);
        assert_relative_eq!(z, 4.19625, max_relative = 1e-12);
    }

    #[test]
    fn tracked_steady_state_keeps_input() {
        let m = toy();
        let y0 = Vector2::new(400.0, 0.95);
        let u = ControlInput::new(40.0, 0.003);
        let s = solve_qp(&m, &Vector3::zeros(), &y0, &flat_refs(y0, 8), &u, &MpcConfig::default()).unwrap();
        assert!(s.inputs.iter().all(|v| (v.tps - 40.0).abs() < 1e-9 && (v.fuel_rate - 0.003).abs() < 1e-12));
        assert!(s.cost.abs() < 1e-18);
    }

    #[test]
    fn unconstrained_step_matches_dense_solve() {
        // Interior optimum: the solver must agree with a brute-force normal
        // equation built from the prediction function itself.
        let m = toy();
        let cfg = MpcConfig::default();
        let y0 = Vector2::new(400.0, 0.95);
        let refs = flat_refs(Vector2::new(403.0, 0.951), 8);
        let u = ControlInput::new(40.0, 0.003);
        let s = solve_qp(&m, &Vector3::zeros(), &y0, &refs, &u, &cfg).unwrap();
        assert!(s.active.iter().all(|a| !a));
        let nv = 6;
        let f = |v: &DVector<f64>| {
            let du = increments(&cfg, v);
            cost(&cfg, &refs, &predict_horizon(&m, &Vector3::zeros(), &y0, &du, 8), &du)
        };
        // quadratic: recover gradient and Hessian exactly by differences
        let z0 = DVector::zeros(nv);
        let f0 = f(&z0);
        let e = |i: usize| {
            let mut v = DVector::zeros(nv);
            v[i] = 1.0;
            v
        };
        let hess = DMatrix::from_fn(nv, nv, |i, j| f(&(e(i) + e(j))) - f(&e(i)) - f(&e(j)) + f0);
        let grad = DVector::from_fn(nv, |i, _| f(&e(i)) - f0 - 0.5 * hess[(i, i)]);
        let v = hess.lu().solve(&(-grad)).unwrap();
        let s0 = cfg.input_scale();
        assert_relative_eq!(s.inputs[0].tps, 40.0 + v[0] * s0[0], epsilon = 1e-6);
        assert_relative_eq!(s.inputs[0].fuel_rate, 0.003 + v[1] * s0[1], epsilon = 1e-10);
    }

    #[test]
    fn thrust_demand_opens_throttle() {
        let m = toy();
        let y0 = Vector2::new(400.0, 0.95);
        let refs = flat_refs(Vector2::new(600.0, 0.95), 8);
        let s = solve_qp(&m, &Vector3::zeros(), &y0, &refs, &ControlInput::new(40.0, 0.003), &MpcConfig::default()).unwrap();
        assert!(s.inputs[0].tps >= 40.0);
    }

    #[test]
    fn excessive_demand_saturates_throttle() {
        let m = toy();
        let y0 = Vector2::new(400.0, 0.95);
        let refs = flat_refs(Vector2::new(1.0e4, 0.95), 8);
        let cfg = MpcConfig {
            thrust_max_kgf: 5000.0,
            ..MpcConfig::default()
        };
        let s = solve_qp(&m, &Vector3::zeros(), &y0, &refs, &ControlInput::new(88.0, 0.003), &cfg).unwrap();
        assert_eq!(s.inputs[0].tps, 90.0);
        assert!(s.active[0]);
    }

    #[test]
    fn output_limit_is_soft() {
        let m = toy();
        let cfg = MpcConfig::default();
        let y0 = Vector2::new(400.0, 1.2);
        let refs = flat_refs(Vector2::new(400.0, 1.5), 8);
        let s = solve_qp(&m, &Vector3::zeros(), &y0, &refs, &ControlInput::new(40.0, 0.003), &cfg).unwrap();
        let peak = s.predicted.iter().map(|y| y[1]).fold(f64::MIN, f64::max);
        assert!(peak < 1.3, "{peak}");
    }

    #[test]
    fn config_validation() {
        assert!(MpcConfig::default().validate().is_ok());
        for bad in [
            MpcConfig { n1: 0, ..MpcConfig::default() },
            MpcConfig { nc: 9, ..MpcConfig::default() },
            MpcConfig { xi: 0.0, ..MpcConfig::default() },
            MpcConfig { lambda_min: 1.3, ..MpcConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    proptest! {
        #[test]
        fn never_worse_than_holding_and_always_feasible(
            t_ref in 0.0f64..1400.0,
            l_ref in 0.7f64..1.25,
            tps in 5.0f64..90.0,
            fuel in 0.0011f64..0.0055,
            dq in -1.0f64..1.0,
            dn in -3.0f64..3.0,
        ) {
            let cfg = MpcConfig::default();
            let y0 = Vector2::new(400.0, 0.95);
            let s = solve_qp(&toy(), &Vector3::new(dq, dn, 0.0), &y0, &flat_refs(Vector2::new(t_ref, l_ref), 8), &ControlInput::new(tps, fuel), &cfg).unwrap();
            prop_assert!(s.cost <= s.cost_hold);
            prop_assert!(s.cost >= 0.0 && s.cost.is_finite());
            prop_assert!(s.inputs.iter().all(|u| cfg.inputs.contains(u)));
        }
    }
}

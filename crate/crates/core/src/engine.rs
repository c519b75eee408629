//! Mean-value model of a two-stroke spark-ignition engine.
//!
//! Crankshaft dynamics:
//!
//! ```text
//! I·ω·dω/dt = Hu·ηi·(1 − kf)·ṁf(t − τd) − Pf − Pb
//! Q_eng     = [Hu·ηi·(1 − kf)·ṁf(t − τd) − Pf] / ω
//! λ         = ṁas / (ṁf·L_th)
//! ```
//!
//! The intake is an isothermal manifold filled through a compressible-orifice
//! throttle and emptied by speed-density cylinder induction. Injected fuel
//! reaches the cylinder after a pure delay held in a ring buffer at the
//! internal substep resolution. Speeds cross the module boundary in rev/s;
//! the integrator works in rad/s.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Throttle position at which the effective area reaches its maximum (%).
pub const FULL_THROTTLE: f64 = 90.0;

/// Thermal efficiency ηi(λ, n): a product of two concave quadratics, clamped
/// at zero for mixtures far from the peak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyMap {
    pub peak: f64,
    pub lambda_peak: f64,
    pub lambda_curvature: f64,
    /// rev/s
    pub speed_peak: f64,
    pub speed_curvature: f64,
}

impl Default for EfficiencyMap {
    fn default() -> Self {
        Self {
            peak: 0.2105,
            lambda_peak: 1.05,
            lambda_curvature: 2.0,
            speed_peak: 110.0,
            speed_curvature: 1.0,
        }
    }
}

impl EfficiencyMap {
    pub fn eval(&self, lambda: f64, speed: f64) -> f64 {
        let dl = lambda - self.lambda_peak;
        let ds = 1.0 - speed / self.speed_peak;
        let lambda_term = (1.0 - self.lambda_curvature * dl * dl).max(0.0);
        let speed_term = (1.0 - self.speed_curvature * ds * ds).max(0.0);
        // NaN from an infinite lean mixture collapses to zero as well
        let eta = self.peak * lambda_term * speed_term;
        if eta.is_finite() {
            eta
        } else {
            0.0
        }
    }
}

/// Friction power Pf = c1·n + c2·n² with n in rev/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrictionPolynomial {
    /// W per rev/s
    pub linear: f64,
    /// W per (rev/s)²
    pub quadratic: f64,
}

impl Default for FrictionPolynomial {
    fn default() -> Self {
        Self {
            linear: 97.9,
            quadratic: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirPath {
    /// Discharge coefficient times throttle bore area at full throttle (m²).
    pub throttle_area: f64,
    /// m³
    pub manifold_volume: f64,
    /// Swept volume inducted once per revolution (m³).
    pub displacement: f64,
    pub volumetric_efficiency: f64,
    /// Pa
    pub ambient_pressure: f64,
    /// K
    pub ambient_temperature: f64,
    /// J/(kg·K)
    pub gas_constant: f64,
    pub heat_capacity_ratio: f64,
    /// Above this manifold/ambient pressure ratio the orifice function is
    /// replaced by a straight line to zero at ratio 1, removing the infinite
    /// slope of the isentropic formula.
    pub linear_pressure_ratio: f64,
}

impl Default for AirPath {
    fn default() -> Self {
        Self {
            throttle_area: 4.0e-4,
            manifold_volume: 2.0e-3,
            displacement: 1.0e-3,
            volumetric_efficiency: 0.8,
            ambient_pressure: 101_325.0,
            ambient_temperature: 293.0,
            gas_constant: 287.0,
            heat_capacity_ratio: 1.4,
            linear_pressure_ratio: 0.95,
        }
    }
}

impl AirPath {
    /// Effective throttle area (m²), nondecreasing in `tps` and zero when closed.
    pub fn effective_area(&self, tps: f64) -> f64 {
        let opening = tps.clamp(0.0, FULL_THROTTLE) / FULL_THROTTLE;
        self.throttle_area * (1.0 - (0.5 * PI * opening).cos())
    }

    /// Inverse of [`AirPath::effective_area`] on `[0, FULL_THROTTLE]`.
    pub fn throttle_for_area(&self, area: f64) -> Option<f64> {
        let x = 1.0 - area / self.throttle_area;
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        Some(x.acos() / (0.5 * PI) * FULL_THROTTLE)
    }

    fn critical_pressure_ratio(&self) -> f64 {
        let g = self.heat_capacity_ratio;
        (2.0 / (g + 1.0)).powf(g / (g - 1.0))
    }

    fn isentropic_flow_function(&self, pr: f64) -> f64 {
        let g = self.heat_capacity_ratio;
        let v = 2.0 * g / (g - 1.0) * (pr.powf(2.0 / g) - pr.powf((g + 1.0) / g));
        v.max(0.0).sqrt()
    }

    /// Dimensionless orifice flow function of the downstream/upstream pressure ratio.
    pub fn flow_function(&self, pressure_ratio: f64) -> f64 {
        let pc = self.critical_pressure_ratio();
        let pl = self.linear_pressure_ratio;
        if pressure_ratio <= pc {
            self.isentropic_flow_function(pc)
        } else if pressure_ratio < pl {
            self.isentropic_flow_function(pressure_ratio)
        } else {
            self.isentropic_flow_function(pl) * (1.0 - pressure_ratio) / (1.0 - pl)
        }
    }

    /// Throttle mass flow into the manifold (kg/s).
    pub fn throttle_flow(&self, tps: f64, manifold_pressure: f64) -> f64 {
        let upstream = self.ambient_pressure / (self.gas_constant * self.ambient_temperature).sqrt();
        self.effective_area(tps)
            * upstream
            * self.flow_function(manifold_pressure / self.ambient_pressure)
    }

    /// Speed-density cylinder induction (kg/s); `speed` in rev/s.
    pub fn cylinder_flow(&self, manifold_pressure: f64, speed: f64) -> f64 {
        let density = manifold_pressure / (self.gas_constant * self.ambient_temperature);
        self.volumetric_efficiency * self.displacement * speed.max(0.0) * density
    }

    /// Manifold pressure giving `air_flow` at `speed` under steady induction.
    pub fn pressure_for_cylinder_flow(&self, air_flow: f64, speed: f64) -> f64 {
        air_flow * self.gas_constant * self.ambient_temperature
            / (self.volumetric_efficiency * self.displacement * speed)
    }

    fn pressure_gain(&self) -> f64 {
        self.gas_constant * self.ambient_temperature / self.manifold_volume
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams {
    /// Hu (J/kg)
    pub lower_heating_value: f64,
    /// kf, short-circuit and overflow fuel loss fraction
    pub fuel_loss_coeff: f64,
    /// I (kg·m²), engine and fan referred to the crankshaft
    pub inertia: f64,
    /// τd (s)
    pub injection_delay: f64,
    /// L_th
    pub stoich_afr: f64,
    pub efficiency: EfficiencyMap,
    pub friction: FrictionPolynomial,
    pub air_path: AirPath,
    /// dt_int (s)
    pub internal_substep: f64,
    /// Idle floor (rev/s); the engine is declared stalled below it.
    pub stall_speed: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            lower_heating_value: 43.0e6,
            fuel_loss_coeff: 0.2,
            inertia: 0.15,
            injection_delay: 0.05,
            stoich_afr: 14.7,
            efficiency: EfficiencyMap::default(),
            friction: FrictionPolynomial::default(),
            air_path: AirPath::default(),
            internal_substep: 1.0e-3,
            stall_speed: 10.0,
        }
    }
}

impl EngineParams {
    pub fn validate(&self, sample_time: f64) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("engine: {m}")));
        if !(self.lower_heating_value > 0.0) {
            return fail("lower_heating_value must be positive");
        }
        if !(self.inertia > 0.0) {
            return fail("inertia must be positive");
        }
        if !(0.0..1.0).contains(&self.fuel_loss_coeff) {
            return fail("fuel_loss_coeff must lie in [0, 1)");
        }
        if !(self.injection_delay >= 0.0) {
            return fail("injection_delay must be nonnegative");
        }
        if !(self.stoich_afr > 0.0) {
            return fail("stoich_afr must be positive");
        }
        if !(self.internal_substep > 0.0) {
            return fail("internal_substep must be positive");
        }
        if substeps_per(sample_time, self.internal_substep).is_none() {
            return fail("internal_substep must divide the control sampling interval");
        }
        if !(self.stall_speed > 0.0) {
            return fail("stall_speed must be positive");
        }
        let a = &self.air_path;
        if !(a.throttle_area > 0.0
            && a.manifold_volume > 0.0
            && a.displacement > 0.0
            && a.volumetric_efficiency > 0.0
            && a.ambient_pressure > 0.0
            && a.ambient_temperature > 0.0
            && a.heat_capacity_ratio > 1.0
            && a.linear_pressure_ratio < 1.0)
        {
            return fail("air path coefficients out of range");
        }
        if self.friction.linear < 0.0 || self.friction.quadratic < 0.0 {
            return fail("friction coefficients must be nonnegative");
        }
        Ok(())
    }

    /// Length of the fuel delay line in internal substeps.
    pub fn delay_steps(&self) -> usize {
        let ratio = self.injection_delay / self.internal_substep;
        (ratio - 1e-9).ceil().max(0.0) as usize
    }

    /// Net indicated power Hu·ηi·(1 − kf)·ṁf (W).
    pub fn combustion_power(&self, fuel_rate: f64, lambda: f64, speed: f64) -> f64 {
        if fuel_rate <= 0.0 {
            return 0.0;
        }
        self.lower_heating_value
            * self.efficiency.eval(lambda, speed)
            * (1.0 - self.fuel_loss_coeff)
            * fuel_rate
    }

    fn lambda_or_lean(&self, air_flow: f64, fuel_rate: f64) -> f64 {
        normalized_afr(air_flow, fuel_rate, self.stoich_afr).unwrap_or(f64::INFINITY)
    }
}

fn substeps_per(dt: f64, dt_int: f64) -> Option<usize> {
    let ratio = dt / dt_int;
    let rounded = ratio.round();
    if rounded >= 1.0 && (ratio - rounded).abs() < 1e-6 {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Engine actuator command.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Throttle position (% of full travel).
    pub tps: f64,
    /// Injected fuel mass flow ṁfi (kg/s).
    pub fuel_rate: f64,
}

impl ControlInput {
    pub fn new(tps: f64, fuel_rate: f64) -> Self {
        Self { tps, fuel_rate }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.tps, self.fuel_rate]
    }

    pub fn from_array(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

/// Box bounds on [`ControlInput`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputBounds {
    pub tps_min: f64,
    pub tps_max: f64,
    pub fuel_min: f64,
    pub fuel_max: f64,
}

impl Default for InputBounds {
    fn default() -> Self {
        Self {
            tps_min: 5.0,
            tps_max: 90.0,
            fuel_min: 0.0011,
            fuel_max: 0.0055,
        }
    }
}

impl InputBounds {
    pub fn lower(&self) -> [f64; 2] {
        [self.tps_min, self.fuel_min]
    }

    pub fn upper(&self) -> [f64; 2] {
        [self.tps_max, self.fuel_max]
    }

    pub fn contains(&self, u: &ControlInput) -> bool {
        (self.tps_min..=self.tps_max).contains(&u.tps)
            && (self.fuel_min..=self.fuel_max).contains(&u.fuel_rate)
    }

    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput::new(
            u.tps.clamp(self.tps_min, self.tps_max),
            u.fuel_rate.clamp(self.fuel_min, self.fuel_max),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.tps_min < self.tps_max && self.fuel_min < self.fuel_max && self.fuel_min > 0.0 {
            Ok(())
        } else {
            Err(Error::Config("input bounds must be ordered with positive fuel".into()))
        }
    }
}

/// Measured engine quantities plus the internal states the controller never sees.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineState {
    /// Q_eng (N·m)
    pub torque: f64,
    /// n (rev/s)
    pub speed: f64,
    /// λ
    pub lambda: f64,
    /// Pa
    pub manifold_pressure: f64,
    /// Injected fuel rates awaiting combustion, oldest first (kg/s).
    pub fuel_buffer: VecDeque<f64>,
}

impl EngineState {
    /// State vector `[Q_eng, n, λ]` exposed to the controller.
    pub fn measured(&self) -> [f64; 3] {
        [self.torque, self.speed, self.lambda]
    }

    /// Fuel rate burning at the current instant.
    pub fn delayed_fuel(&self, commanded: f64) -> f64 {
        self.fuel_buffer.front().copied().unwrap_or(commanded)
    }

    /// Builds a consistent state at the given speed and manifold pressure
    /// with the delay line primed at a constant fuel rate.
    pub fn settled(
        speed: f64,
        manifold_pressure: f64,
        fuel_rate: f64,
        params: &EngineParams,
    ) -> Result<Self> {
        let buffer: VecDeque<f64> = std::iter::repeat_n(fuel_rate, params.delay_steps()).collect();
        let air = params.air_path.cylinder_flow(manifold_pressure, speed);
        let lambda = params.lambda_or_lean(air, fuel_rate);
        let torque = engine_torque(speed, lambda, fuel_rate, params)?;
        Ok(Self {
            torque,
            speed,
            lambda,
            manifold_pressure,
            fuel_buffer: buffer,
        })
    }
}

/// Instantaneous intake flows (kg/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AirFlows {
    /// Throttle flow into the manifold.
    pub throttle: f64,
    /// Speed-density flow from the manifold into the cylinder (ṁas).
    pub cylinder: f64,
}

pub fn air_mass_flow(tps: f64, manifold_pressure: f64, speed: f64, params: &EngineParams) -> AirFlows {
    AirFlows {
        throttle: params.air_path.throttle_flow(tps, manifold_pressure),
        cylinder: params.air_path.cylinder_flow(manifold_pressure, speed),
    }
}

/// Pf (W) at crankshaft speed `speed` (rev/s).
pub fn friction_power(speed: f64, params: &EngineParams) -> f64 {
    let n = speed.max(0.0);
    params.friction.linear * n + params.friction.quadratic * n * n
}

/// Brake torque from the fuel that is burning now (the delayed injection).
pub fn engine_torque(speed: f64, lambda: f64, delayed_fuel_rate: f64, params: &EngineParams) -> Result<f64> {
    let omega = 2.0 * PI * speed;
    if !(omega >= 2.0 * PI * params.stall_speed) {
        return Err(Error::SingularSpeed { omega });
    }
    let combustion = params.combustion_power(delayed_fuel_rate, lambda, speed);
    Ok((combustion - friction_power(speed, params)) / omega)
}

pub fn normalized_afr(air_flow: f64, fuel_rate: f64, stoich_afr: f64) -> Result<f64> {
    if !(fuel_rate > 0.0) {
        return Err(Error::ZeroFuel(fuel_rate));
    }
    Ok(air_flow / (fuel_rate * stoich_afr))
}

/// Continuous right-hand side for (ω, p_m) with the burning fuel rate frozen.
fn derivatives<L: Fn(f64) -> f64>(
    omega: f64,
    pressure: f64,
    tps: f64,
    burning_fuel: f64,
    load: &L,
    params: &EngineParams,
) -> (f64, f64) {
    let speed = omega / (2.0 * PI);
    let air = &params.air_path;
    let cylinder = air.cylinder_flow(pressure, speed);
    let lambda = params.lambda_or_lean(cylinder, burning_fuel);
    let net = params.combustion_power(burning_fuel, lambda, speed)
        - friction_power(speed, params)
        - load(speed);
    let omega_dot = net / (params.inertia * omega);
    let pressure_dot = air.pressure_gain() * (air.throttle_flow(tps, pressure) - cylinder);
    (omega_dot, pressure_dot)
}

/// Advances the engine by `dt` seconds with fixed-step RK4 at the internal
/// substep. `load` maps crankshaft speed (rev/s) to absorbed power Pb (W).
pub fn step_engine<L: Fn(f64) -> f64>(
    state: &EngineState,
    input: &ControlInput,
    load: L,
    params: &EngineParams,
    dt: f64,
) -> Result<EngineState> {
    let substeps = substeps_per(dt, params.internal_substep).ok_or_else(|| {
        Error::Config(format!(
            "step {dt} s is not a multiple of the internal substep {} s",
            params.internal_substep
        ))
    })?;
    let h = params.internal_substep;
    let floor = 2.0 * PI * params.stall_speed;
    let delay = params.delay_steps();

    let mut omega = 2.0 * PI * state.speed;
    let mut pressure = state.manifold_pressure;
    let mut buffer = state.fuel_buffer.clone();
    while buffer.len() < delay {
        buffer.push_front(input.fuel_rate);
    }
    while buffer.len() > delay {
        buffer.pop_front();
    }

    for _ in 0..substeps {
        let burning = if delay == 0 {
            input.fuel_rate
        } else {
            let f = buffer.pop_front().unwrap_or(input.fuel_rate);
            buffer.push_back(input.fuel_rate);
            f
        };
        let f = |w: f64, p: f64| derivatives(w, p, input.tps, burning, &load, params);
        let (k1w, k1p) = f(omega, pressure);
        let (k2w, k2p) = f(omega + 0.5 * h * k1w, pressure + 0.5 * h * k1p);
        let (k3w, k3p) = f(omega + 0.5 * h * k2w, pressure + 0.5 * h * k2p);
        let (k4w, k4p) = f(omega + h * k3w, pressure + h * k3p);
        omega += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        pressure += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if !(omega >= floor) {
            return Err(Error::Stall {
                speed: omega / (2.0 * PI),
                floor: params.stall_speed,
            });
        }
        pressure = pressure.clamp(1.0, params.air_path.ambient_pressure);
    }

    let speed = omega / (2.0 * PI);
    let burning = buffer.front().copied().unwrap_or(input.fuel_rate);
    let cylinder = params.air_path.cylinder_flow(pressure, speed);
    let lambda = params.lambda_or_lean(cylinder, burning);
    let torque = engine_torque(speed, lambda, burning, params)?;
    Ok(EngineState {
        torque,
        speed,
        lambda,
        manifold_pressure: pressure,
        fuel_buffer: buffer,
    })
}

//! The coupled lift system: engine crankshaft driving the ducted fan through
//! a rigid pulley. Thrust is the ducted fan thrust at the slaved fan speed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::{self, ControlInput, EngineParams, EngineState, InputBounds};
use crate::fan::{FanGeometry, FanMap, FanModel};
use crate::{Error, Result};

/// Plant outputs `[T_DF (N), λ]`.
pub type Outputs = [f64; 2];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub engine: EngineParams,
    pub inputs: InputBounds,
}

#[derive(Clone, Debug)]
pub struct Dfls {
    pub engine: EngineParams,
    pub fan: FanMap,
    pub bounds: InputBounds,
    pub sample_time: f64,
}

/// Steady operating point and the input that holds it.
#[derive(Clone, Debug)]
pub struct Trim {
    pub state: EngineState,
    pub input: ControlInput,
}

impl Dfls {
    pub fn new(plant: &PlantConfig, fan: &FanGeometry, sample_time: f64) -> Result<Self> {
        plant.engine.validate(sample_time)?;
        plant.inputs.validate()?;
        Ok(Self {
            engine: plant.engine.clone(),
            fan: FanMap::from_geometry(fan)?,
            bounds: plant.inputs.clone(),
            sample_time,
        })
    }

    pub fn thrust(&self, state: &EngineState) -> f64 {
        // the quadratic map cannot fail
        self.fan.ducted_thrust_at(state.speed).unwrap_or(0.0)
    }

    pub fn outputs(&self, state: &EngineState) -> Outputs {
        [self.thrust(state), state.lambda]
    }

    pub fn load_power(&self, speed: f64) -> f64 {
        self.fan.load_power(speed).unwrap_or(0.0)
    }

    /// Advances one control interval under input `u` (applied as given).
    pub fn step(&self, state: &EngineState, u: &ControlInput) -> Result<EngineState> {
        engine::step_engine(state, u, |n| self.load_power(n), &self.engine, self.sample_time)
    }

    /// Steady point at crankshaft speed `speed` (rev/s) and mixture `lambda`.
    /// The returned input is not checked against the box.
    pub fn trim_at_speed(&self, speed: f64, lambda: f64) -> Result<Trim> {
        let e = &self.engine;
        let per_fuel = e.combustion_power(1.0, lambda, speed);
        if !(per_fuel > 0.0) || !(speed >= e.stall_speed) {
            return Err(Error::Infeasible(format!(
                "no combustion power at n = {speed} rev/s, lambda = {lambda}"
            )));
        }
        let fuel = (engine::friction_power(speed, e) + self.load_power(speed)) / per_fuel;
        let air = lambda * e.stoich_afr * fuel;
        let a = &e.air_path;
        let pressure = a.pressure_for_cylinder_flow(air, speed);
        let psi = a.flow_function(pressure / a.ambient_pressure);
        let upstream = a.ambient_pressure / (a.gas_constant * a.ambient_temperature).sqrt();
        let tps = (psi > 0.0)
            .then(|| a.throttle_for_area(air / (upstream * psi)))
            .flatten()
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "throttle cannot pass {air} kg/s at n = {speed} rev/s"
                ))
            })?;
        let input = ControlInput::new(tps, fuel);
        let state = EngineState::settled(speed, pressure, fuel, e)?;
        Ok(Trim { state, input })
    }

    /// Steady point at ducted thrust `thrust` (N) and mixture `lambda`.
    pub fn trim(&self, thrust: f64, lambda: f64) -> Result<Trim> {
        self.trim_at_speed(self.fan.speed_for_thrust(thrust), lambda)
    }

    /// Like [`Dfls::trim`] but fails when the holding input leaves the box.
    pub fn trim_within_bounds(&self, thrust: f64, lambda: f64) -> Result<Trim> {
        let t = self.trim(thrust, lambda)?;
        if self.bounds.contains(&t.input) {
            Ok(t)
        } else {
            Err(Error::Infeasible(format!(
                "trim at {thrust} N, lambda {lambda} needs tps {} %, fuel {} kg/s",
                t.input.tps, t.input.fuel_rate
            )))
        }
    }

    /// Brake power Q_eng·2π·n (W).
    pub fn brake_power(state: &EngineState) -> f64 {
        state.torque * 2.0 * PI * state.speed
    }
}

//! Model predictive control over the LPV prediction model.

pub mod controller;
pub mod qp;

pub use controller::{
    ampc_step, cost, linear_mpc_step, output_penalty, predict_horizon, solve_qp, Controller, HorizonSolution, Measurement,
    Model, MpcConfig, StepResult,
};
pub use qp::{solve_box_qp, BoxQp, QpMethod, QpOptions, QpSolution};

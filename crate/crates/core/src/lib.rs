//! Simulation and control toolkit for an engine-driven ducted fan lift system.
//!
//! The crate is organised bottom-up:
//!
//! - [`engine`]: mean-value two-stroke engine (crankshaft, air path, fuel
//!   delay, normalized air-fuel ratio).
//! - [`fan`]: blade-element/momentum ducted fan and the power-to-thrust map.
//! - [`plant`]: the coupled engine + fan plant and its steady-state trim.
//! - [`nn`]: MLP, Elman and RBF engine models, data generation and training.
//! - [`lpv`]: the associated derivative network of an RBF model and the
//!   discrete LPV matrices built from it.
//! - [`mpc`]: box-constrained QP solvers and the adaptive / fixed-model MPC.
//! - [`sim`]: configuration, closed-loop scenarios, metrics and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod fan;
pub mod lpv;
pub mod mpc;
pub mod nn;
pub mod plant;
pub mod sim;

pub use error::{Error, Result};

/// Newtons per kilogram-force.
pub const KGF: f64 = 9.806_65;

/// Control sampling interval (s).
pub const SAMPLE_TIME: f64 = 0.1;

pub fn kgf_to_newton(kgf: f64) -> f64 {
    kgf * KGF
}

pub fn newton_to_kgf(newton: f64) -> f64 {
    newton / KGF
}

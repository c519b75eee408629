use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Crankshaft speed dropped below the idle floor.
    #[error("engine stall: crankshaft speed {speed:.3} rev/s fell below the {floor:.3} rev/s floor")]
    Stall { speed: f64, floor: f64 },

    #[error("crankshaft speed {omega:.4} rad/s is below the singular-speed floor")]
    SingularSpeed { omega: f64 },

    #[error("fuel mass flow must be positive to form an air-fuel ratio (got {0})")]
    ZeroFuel(f64),

    #[error("inflow iteration did not converge after {iterations} iterations (residual {residual:e})")]
    InflowNonConvergence { iterations: usize, residual: f64 },

    #[error("requested power {power:.1} W exceeds the fan's {limit:.1} W at the top of the speed range")]
    Bracket { power: f64, limit: f64 },

    #[error("operating point is outside the plant envelope: {0}")]
    Infeasible(String),

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::Stall { .. } | Error::SingularSpeed { .. } => 3,
            Error::Solver(_) => 4,
            _ => 1,
        }
    }
}

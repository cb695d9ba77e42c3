use thiserror::Error;

use crate::hopf::AssumptionReport;

pub type Result<T, E = MovmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MovmError {
    #[error("headway {y} is outside the domain of the {family} OVF")]
    OvfDomain { family: &'static str, y: f64 },

    #[error("velocity {v} is outside the open range (0, {v_max}) of the OVF")]
    OvfRange { v: f64, v_max: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("root search did not converge: {0}")]
    NonConvergence(String),

    #[error("simulation blew up at t = {t} s (vehicle pair {vehicle})")]
    BlowUp { t: f64, vehicle: usize },

    #[error("vehicle pair {vehicle} never remains inside the settling band")]
    NotSettled { vehicle: usize },

    #[error("oscillation is not stationary: half-window amplitudes {first} and {second}")]
    NonStationary { first: f64, second: f64 },

    #[error("normal-form assumptions violated: {0}")]
    AssumptionViolation(Box<AssumptionReport>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MovmError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        MovmError::InvalidParameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MovmError::InvalidConfig(msg.into())
    }
}

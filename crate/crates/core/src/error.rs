use thiserror::Error;

/// Errors produced by the model, catalog, verifier, and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state ({x}, {y}) is outside the open positive quadrant")]
    OutsideQuadrant { x: f64, y: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{clf} is not designated for controller {controller}; designated: {designated}")]
    UnsupportedPairing {
        clf: String,
        controller: String,
        designated: String,
    },

    #[error("controller {controller} does not target model {model}")]
    ModelMismatch { controller: String, model: String },

    #[error("no input-affine decomposition available for {0}")]
    NoDecomposition(String),

    #[error("{0} is strict: no semidefiniteness witness exists")]
    NoWitness(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },

    #[error("non-finite derivative at t = {t}")]
    NonFiniteDerivative { t: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

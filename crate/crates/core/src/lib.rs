//! Predator-prey harvesting models with strict control Lyapunov functions,
//! grid-based certification of their claims, and a positivity-preserving
//! simulator.

// `!(x > 0.0)` is used on purpose so that NaN fails a check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clf;
pub mod cli;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod figures;
pub mod integrator;
pub mod oracle;
pub mod simulator;
pub mod verifier;

pub use clf::{ClfEvaluation, ClfId, InputAffineDecomposition, Pairing};
pub use controllers::{control, ConstantRate, ControllerSpec, Epsilon};
pub use dynamics::{ModelId, PopulationState};
pub use error::{Error, Result};

//! Harvesting models, coordinate systems, and the backstepping target system.
//!
//! Both models share the predator equation `Y' = (X - U) Y`. They differ in
//! whether the harvesting effort also removes prey:
//!
//! ```text
//! predator-only:  X' = (1 - Y) X
//! simultaneous:   X' = (2 - Y - U) X
//! ```
//!
//! For `U = 1` the two coincide and conserve `X + Y - ln(XY)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// `phi(s) = e^s - 1`, the dissipative nonlinearity of the log-coordinate model.
#[inline]
pub fn phi(s: f64) -> f64 {
    s.exp_m1()
}

/// Prey and predator concentrations, strictly inside the positive quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    prey: f64,
    predator: f64,
}

impl PopulationState {
    pub const EQUILIBRIUM: PopulationState = PopulationState {
        prey: 1.0,
        predator: 1.0,
    };

    pub fn new(prey: f64, predator: f64) -> Result<Self> {
        // NaN fails both comparisons
        if prey > 0.0 && predator > 0.0 && prey.is_finite() && predator.is_finite() {
            Ok(Self { prey, predator })
        } else {
            Err(Error::OutsideQuadrant {
                x: prey,
                y: predator,
            })
        }
    }

    #[inline]
    pub fn prey(&self) -> f64 {
        self.prey
    }

    #[inline]
    pub fn predator(&self) -> f64 {
        self.predator
    }

    /// Euclidean distance to the equilibrium `(1, 1)`.
    pub fn distance_to_equilibrium(&self) -> f64 {
        (self.prey - 1.0).hypot(self.predator - 1.0)
    }

    /// Max-norm distance to the equilibrium `(1, 1)`.
    pub fn max_distance_to_equilibrium(&self) -> f64 {
        (self.prey - 1.0).abs().max((self.predator - 1.0).abs())
    }

    pub fn to_log(&self) -> LogState {
        LogState {
            x: self.prey.ln(),
            y: self.predator.ln(),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.prey, self.predator]
    }
}

impl fmt::Display for PopulationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.prey, self.predator)
    }
}

/// `(x, y) = (ln X, ln Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogState {
    pub x: f64,
    pub y: f64,
}

impl LogState {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        Ok(Self {
            x: ensure_finite(x, "log prey")?,
            y: ensure_finite(y, "log predator")?,
        })
    }

    /// Maps back to concentrations. Fails only if `exp` over- or underflows.
    pub fn to_population(&self) -> Result<PopulationState> {
        PopulationState::new(self.x.exp(), self.y.exp())
    }
}

/// Forwarding coordinates: `eta = -y`, `xi = x + eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardingState {
    pub xi: f64,
    pub eta: f64,
}

impl ForwardingState {
    pub fn to_log(&self) -> LogState {
        LogState {
            x: self.xi - self.eta,
            y: -self.eta,
        }
    }
}

/// Backstepping coordinates: `x = ln X`, `z = y - x = ln(Y/X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacksteppingState {
    pub x: f64,
    pub z: f64,
}

impl BacksteppingState {
    pub fn new(x: f64, z: f64) -> Result<Self> {
        Ok(Self {
            x: ensure_finite(x, "log prey")?,
            z: ensure_finite(z, "log predator-to-prey ratio")?,
        })
    }

    pub fn to_log(&self) -> LogState {
        LogState {
            x: self.x,
            y: self.x + self.z,
        }
    }
}

/// All coordinate views of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinates {
    pub log: LogState,
    pub forwarding: ForwardingState,
    pub backstepping: BacksteppingState,
}

pub fn coordinate_maps(s: PopulationState) -> Coordinates {
    let log = s.to_log();
    let eta = -log.y;
    Coordinates {
        log,
        forwarding: ForwardingState {
            xi: log.x + eta,
            eta,
        },
        backstepping: BacksteppingState {
            x: log.x,
            z: log.y - log.x,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    /// Harvesting removes predators only.
    PredatorOnlyHarvest,
    /// Harvesting removes prey and predators at the same rate.
    SimultaneousHarvest,
}

impl ModelId {
    pub const ALL: [ModelId; 2] = [ModelId::PredatorOnlyHarvest, ModelId::SimultaneousHarvest];

    pub fn name(&self) -> &'static str {
        match self {
            ModelId::PredatorOnlyHarvest => "predator-only",
            ModelId::SimultaneousHarvest => "simultaneous",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "predator-only" | "PredatorOnlyHarvest" | "1" | "sf" => {
                Ok(ModelId::PredatorOnlyHarvest)
            }
            "simultaneous" | "SimultaneousHarvest" | "2" | "both" => {
                Ok(ModelId::SimultaneousHarvest)
            }
            other => Err(Error::Parse(format!(
                "unknown model '{other}' (expected predator-only or simultaneous)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub d_prey: f64,
    pub d_predator: f64,
}

impl Derivative {
    pub const ZERO: Derivative = Derivative {
        d_prey: 0.0,
        d_predator: 0.0,
    };
}

pub fn vector_field(model: ModelId, s: PopulationState, input: f64) -> Result<Derivative> {
    ensure_finite(input, "harvesting rate")?;
    let (x, y) = (s.prey, s.predator);
    let d_prey = match model {
        ModelId::PredatorOnlyHarvest => (1.0 - y) * x,
        ModelId::SimultaneousHarvest => (2.0 - y - input) * x,
    };
    Ok(Derivative {
        d_prey,
        d_predator: (x - input) * y,
    })
}

/// Per-capita growth rates `(X'/X, Y'/Y)` at `(e^x, e^y)`.
pub fn log_vector_field(model: ModelId, ls: LogState, input: f64) -> Result<(f64, f64)> {
    ensure_finite(ls.x, "log prey")?;
    ensure_finite(ls.y, "log predator")?;
    ensure_finite(input, "harvesting rate")?;
    let dx = match model {
        ModelId::PredatorOnlyHarvest => -phi(ls.y),
        ModelId::SimultaneousHarvest => 1.0 - phi(ls.y) - input,
    };
    let dy = ls.x.exp() - input;
    if dx.is_finite() && dy.is_finite() {
        Ok((dx, dy))
    } else {
        Err(Error::NonFinite("log vector field"))
    }
}

/// `X + Y - ln(XY)`; conserved by both models when `U = 1`.
pub fn open_loop_invariant(s: PopulationState) -> f64 {
    s.prey + s.predator - (s.prey * s.predator).ln()
}

/// Closed loop of the predator-only model under `U = Y^2/X` in `(x, z)`.
///
/// The first component is `-phi(x) + phi(x)/phi(-x) * phi(z)`; the ratio
/// equals `-e^x` identically, which reduces it to `1 - e^{x+z}` with no
/// singularity at `x = 0`.
pub fn target_system_field(bs: BacksteppingState) -> (f64, f64) {
    let (x, z) = (bs.x, bs.z);
    let dx = -phi(x + z);
    let dz = phi(x) + (x + 2.0 * z).exp() * phi(-z);
    (dx, dz)
}

//! Feedback laws for the harvesting rate `U`.
//!
//! Every law returns exactly `1` at the equilibrium `(1, 1)`. No law is
//! saturated or projected onto `U > 0`; negative values are returned as-is.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelId, PopulationState};
use crate::error::{Error, Result};

/// Gain `eps` of the mixed harvesting law, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps < 1.0 {
            Ok(Self(eps))
        } else {
            Err(Error::InvalidParameter {
                name: "eps",
                value: eps,
                reason: "must lie strictly inside (0, 1)",
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `alpha = eps / (1 + eps)`, in `(0, 1/2)`.
    #[inline]
    pub fn alpha(self) -> f64 {
        self.0 / (1.0 + self.0)
    }
}

impl TryFrom<f64> for Epsilon {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Epsilon::new(v)
    }
}

impl From<Epsilon> for f64 {
    fn from(e: Epsilon) -> f64 {
        e.0
    }
}

/// A constant harvesting rate, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ConstantRate(f64);

impl ConstantRate {
    pub fn new(u0: f64) -> Result<Self> {
        if u0 > 0.0 && u0.is_finite() {
            Ok(Self(u0))
        } else {
            Err(Error::InvalidParameter {
                name: "U0",
                value: u0,
                reason: "constant harvesting rate must be positive and finite",
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ConstantRate {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        ConstantRate::new(v)
    }
}

impl From<ConstantRate> for f64 {
    fn from(c: ConstantRate) -> f64 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControllerSpec {
    /// `U = U0`.
    Constant(ConstantRate),
    /// `U = Y`.
    PredatorLinear,
    /// `U = 1 + eps (Y - 1)`.
    MixedLinear(Epsilon),
    /// `U = X + Y - X/Y`.
    ForwardingFeedback,
    /// `U = Y + (Y - X)/Y`.
    BacksteppingConventional,
    /// `U = Y^2 / X`.
    BacksteppingPositive,
}

impl ControllerSpec {
    /// The uncontrolled (`U = 1`) system.
    pub const OPEN_LOOP: ControllerSpec = ControllerSpec::Constant(ConstantRate(1.0));

    pub fn name(&self) -> &'static str {
        match self {
            ControllerSpec::Constant(_) => "constant",
            ControllerSpec::PredatorLinear => "predator-linear",
            ControllerSpec::MixedLinear(_) => "mixed-linear",
            ControllerSpec::ForwardingFeedback => "forwarding",
            ControllerSpec::BacksteppingConventional => "backstepping-conventional",
            ControllerSpec::BacksteppingPositive => "backstepping-positive",
        }
    }

    /// Builds a controller from its name and the optional parameters.
    pub fn from_name(name: &str, eps: Option<f64>, u0: Option<f64>) -> Result<Self> {
        let spec = match name.trim() {
            "constant" | "Constant" | "open-loop" => {
                ControllerSpec::Constant(ConstantRate::new(u0.unwrap_or(1.0))?)
            }
            "predator-linear" | "PredatorLinear" => ControllerSpec::PredatorLinear,
            "mixed-linear" | "MixedLinear" => {
                let eps = eps
                    .ok_or_else(|| Error::Parse("mixed-linear requires an eps parameter".into()))?;
                ControllerSpec::MixedLinear(Epsilon::new(eps)?)
            }
            "forwarding" | "ForwardingFeedback" => ControllerSpec::ForwardingFeedback,
            "backstepping-conventional" | "BacksteppingConventional" => {
                ControllerSpec::BacksteppingConventional
            }
            "backstepping-positive" | "BacksteppingPositive" => {
                ControllerSpec::BacksteppingPositive
            }
            other => return Err(Error::Parse(format!("unknown controller '{other}'"))),
        };
        Ok(spec)
    }

    /// Models this law was designed for.
    pub fn targets(&self) -> &'static [ModelId] {
        match self {
            ControllerSpec::Constant(_) => &ModelId::ALL,
            ControllerSpec::MixedLinear(_) => &[ModelId::SimultaneousHarvest],
            _ => &[ModelId::PredatorOnlyHarvest],
        }
    }

    pub fn targets_model(&self, model: ModelId) -> bool {
        self.targets().contains(&model)
    }

    /// `true` for the laws that are positive on the whole open quadrant.
    pub fn is_positive_valued(&self) -> bool {
        !matches!(
            self,
            ControllerSpec::ForwardingFeedback | ControllerSpec::BacksteppingConventional
        )
    }

    pub fn ensure_targets(&self, model: ModelId) -> Result<()> {
        if self.targets_model(model) {
            Ok(())
        } else {
            Err(Error::ModelMismatch {
                controller: self.to_string(),
                model: model.to_string(),
            })
        }
    }
}

impl fmt::Display for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerSpec::Constant(u0) => write!(f, "constant(U0={})", u0.value()),
            ControllerSpec::MixedLinear(eps) => write!(f, "mixed-linear(eps={})", eps.value()),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ControllerSpec {
    type Err = Error;

    /// Accepts `name`, `name(eps=0.5)`, or `constant(U0=2)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let Some(open) = s.find('(') else {
            return ControllerSpec::from_name(s, None, None);
        };
        let name = &s[..open];
        let inner = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in '{s}'")))?;
        let (mut eps, mut u0) = (None, None);
        for kv in inner.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in '{kv}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{v}'")))?;
            match k.trim() {
                "eps" => eps = Some(v),
                "U0" | "u0" => u0 = Some(v),
                other => return Err(Error::Parse(format!("unknown parameter '{other}'"))),
            }
        }
        ControllerSpec::from_name(name, eps, u0)
    }
}

/// Harvesting rate prescribed by `spec` at `s`.
pub fn control(spec: ControllerSpec, s: PopulationState) -> f64 {
    let (x, y) = (s.prey(), s.predator());
    match spec {
        ControllerSpec::Constant(u0) => u0.value(),
        ControllerSpec::PredatorLinear => y,
        ControllerSpec::MixedLinear(eps) => 1.0 + eps.value() * (y - 1.0),
        ControllerSpec::ForwardingFeedback => x + y - x / y,
        ControllerSpec::BacksteppingConventional => y + (y - x) / y,
        ControllerSpec::BacksteppingPositive => y * y / x,
    }
}

/// Outcome of the analytic negativity test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativityVerdict {
    /// `true` iff the law prescribes `U < 0` at the state.
    pub negative: bool,
    /// `false` for laws without a negativity region; `negative` is then
    /// constantly `false`.
    pub supported: bool,
}

/// Closed-form description of where a law asks for negative harvesting.
///
/// Forwarding: `Y < 1` and `X > Y^2/(1 - Y)`. For `Y >= 1` the law
/// `X(1 - 1/Y) + Y` is positive, so the bound alone is not enough.
/// Conventional backstepping: `X > (1 + Y) Y`.
pub fn negativity_predicate(spec: ControllerSpec, s: PopulationState) -> NegativityVerdict {
    let (x, y) = (s.prey(), s.predator());
    match spec {
        ControllerSpec::ForwardingFeedback => NegativityVerdict {
            negative: y < 1.0 && x > y * y / (1.0 - y),
            supported: true,
        },
        ControllerSpec::BacksteppingConventional => NegativityVerdict {
            negative: x > (1.0 + y) * y,
            supported: true,
        },
        _ => NegativityVerdict {
            negative: false,
            supported: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x: f64, y: f64) -> PopulationState {
        PopulationState::new(x, y).unwrap()
    }

    fn all_laws() -> Vec<ControllerSpec> {
        vec![
            ControllerSpec::Constant(ConstantRate::new(1.0).unwrap()),
            ControllerSpec::PredatorLinear,
            ControllerSpec::MixedLinear(Epsilon::new(0.5).unwrap()),
            ControllerSpec::ForwardingFeedback,
            ControllerSpec::BacksteppingConventional,
            ControllerSpec::BacksteppingPositive,
        ]
    }

    #[test]
    fn every_law_is_one_at_equilibrium() {
        for c in all_laws() {
            assert_eq!(control(c, PopulationState::EQUILIBRIUM), 1.0, "{c}");
        }
    }

    #[test]
    fn substitution_examples() {
        assert_eq!(
            control(ControllerSpec::ForwardingFeedback, st(4.0, 0.5)),
            -3.5
        );
        assert_eq!(
            control(ControllerSpec::BacksteppingPositive, st(4.0, 0.5)),
            0.0625
        );
        let mixed = ControllerSpec::MixedLinear(Epsilon::new(0.5).unwrap());
        assert_eq!(control(mixed, st(1.0, 3.0)), 2.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(Epsilon::new(0.0).is_err());
        assert!(Epsilon::new(1.0).is_err());
        assert!(Epsilon::new(1.5).is_err());
        assert!(Epsilon::new(f64::NAN).is_err());
        assert!(ConstantRate::new(0.0).is_err());
        assert!(ConstantRate::new(-1.0).is_err());
        assert!("mixed-linear".parse::<ControllerSpec>().is_err());
        assert!("mixed-linear(eps=1.2)".parse::<ControllerSpec>().is_err());
    }

    #[test]
    fn parse_round_trip() {
        for c in all_laws() {
            let back: ControllerSpec = c.to_string().parse().unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn negativity_examples() {
        let fwd = ControllerSpec::ForwardingFeedback;
        let conv = ControllerSpec::BacksteppingConventional;
        assert!(negativity_predicate(fwd, st(4.0, 0.5)).negative);
        assert!(!negativity_predicate(fwd, st(1.0, 1.0)).negative);
        assert!(negativity_predicate(conv, st(3.0, 1.0)).negative);
        assert_eq!(control(conv, st(3.0, 1.0)), -1.0);
        let v = negativity_predicate(ControllerSpec::BacksteppingPositive, st(4.0, 0.5));
        assert!(!v.negative && !v.supported);
    }

    #[test]
    fn backstepping_positive_in_log_coordinates() {
        for &(x, y) in &[(0.1, 8.0), (2.0, 0.5), (17.0, 0.06), (1.0, 1.0)] {
            let s = st(x, y);
            let c = crate::dynamics::coordinate_maps(s);
            let from_log = (c.log.y + c.backstepping.z).exp();
            let u = control(ControllerSpec::BacksteppingPositive, s);
            assert!((u - from_log).abs() <= 1e-12 * u.abs());
        }
    }

    #[test]
    fn model_targets() {
        assert!(ControllerSpec::OPEN_LOOP.targets_model(ModelId::SimultaneousHarvest));
        assert!(ControllerSpec::PredatorLinear
            .ensure_targets(ModelId::SimultaneousHarvest)
            .is_err());
        let mixed = ControllerSpec::MixedLinear(Epsilon::new(0.5).unwrap());
        assert!(mixed.ensure_targets(ModelId::PredatorOnlyHarvest).is_err());
    }
}

//! Catalog of Lyapunov candidates for the two harvesting models.
//!
//! All candidates are assembled from the Volterra block
//! `Psi(S) = S - 1 - ln S`, its log-coordinate twin
//! `Phi(s) = e^s - 1 - s = Psi(e^s)`, and the prey-only augmentation `Pi`.
//! Each one diverges at the boundary of the positive quadrant, so they
//! double as barrier functions.
//!
//! | id               | candidate                                      | closed loop              |
//! |------------------|------------------------------------------------|--------------------------|
//! | `V1_SF`          | `Psi(X) + Psi(Y)`                              | predator-only, `U = Y`   |
//! | `V_SF_STRICT`    | `V1_SF + Psi(1/X) + Psi(Y/X)`                  | predator-only, `U = Y`   |
//! | `V1_BOTH`        | `Psi(X) + (1+eps) Psi(Y)`                      | simultaneous, mixed      |
//! | `V_BOTH_STRICT`  | `V1_BOTH + Pi(X) + Psi(Y / X^alpha)`           | simultaneous, mixed      |
//! | `V_FORWARDING`   | `X/Y - 1 - ln X + Y - 1`                       | predator-only, forwarding|
//! | `V_BACKSTEPPING` | `Psi(1/X) + Psi(Y/X)`                          | predator-only, both backstepping laws |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::controllers::{control, ControllerSpec, Epsilon};
use crate::dynamics::{coordinate_maps, phi, vector_field, LogState, ModelId, PopulationState};
use crate::error::{Error, Result};

/// Volterra block `S - 1 - ln S`, defined for `S > 0`.
pub fn psi(s: f64) -> Result<f64> {
    if s > 0.0 && s.is_finite() {
        Ok(psi_unchecked(s))
    } else {
        Err(Error::InvalidParameter {
            name: "S",
            value: s,
            reason: "Psi is defined only for S > 0",
        })
    }
}

#[inline]
fn psi_unchecked(s: f64) -> f64 {
    let d = s - 1.0;
    if d.abs() < 0.5 {
        d - d.ln_1p()
    } else {
        d - s.ln()
    }
}

#[inline]
fn psi_prime(s: f64) -> f64 {
    1.0 - 1.0 / s
}

/// `Phi(s) = e^s - 1 - s`, the antiderivative of `phi` vanishing at zero.
#[inline]
pub fn phi_big(s: f64) -> f64 {
    s.exp_m1() - s
}

fn check_prey(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "X",
            value: x,
            reason: "Pi is defined only for X > 0",
        })
    }
}

/// Prey-only augmentation of the simultaneous-harvest candidate:
/// `X^-alpha [X - 1 - (X^alpha - 1)/alpha]` with `alpha = eps/(1+eps)`.
pub fn pi_fn(x: f64, eps: Epsilon) -> Result<f64> {
    check_prey(x)?;
    Ok(pi_unchecked(x, eps))
}

#[inline]
fn pi_unchecked(x: f64, eps: Epsilon) -> f64 {
    let a = eps.alpha();
    let lx = x.ln();
    ((x - 1.0) - (a * lx).exp_m1() / a) * (-a * lx).exp()
}

/// `Pi'(X) = (X - 1) / ((1 + eps) X^(1 + alpha))`.
pub fn pi_prime(x: f64, eps: Epsilon) -> Result<f64> {
    check_prey(x)?;
    Ok(pi_prime_unchecked(x, eps))
}

#[inline]
fn pi_prime_unchecked(x: f64, eps: Epsilon) -> f64 {
    (x - 1.0) / ((1.0 + eps.value()) * x.powf(1.0 + eps.alpha()))
}

/// Identifies one catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClfId {
    V1Sf,
    VSfStrict,
    V1Both(Epsilon),
    VBothStrict(Epsilon),
    VForwarding,
    VBackstepping,
}

impl ClfId {
    pub fn base_name(&self) -> &'static str {
        match self {
            ClfId::V1Sf => "V1_SF",
            ClfId::VSfStrict => "V_SF_STRICT",
            ClfId::V1Both(_) => "V1_BOTH",
            ClfId::VBothStrict(_) => "V_BOTH_STRICT",
            ClfId::VForwarding => "V_FORWARDING",
            ClfId::VBackstepping => "V_BACKSTEPPING",
        }
    }

    pub fn eps(&self) -> Option<Epsilon> {
        match self {
            ClfId::V1Both(e) | ClfId::VBothStrict(e) => Some(*e),
            _ => None,
        }
    }

    /// Parses a catalog name; `eps` is required for the simultaneous-harvest
    /// entries unless given inline as `V1_BOTH(eps=0.5)`.
    pub fn from_name(name: &str, eps: Option<f64>) -> Result<Self> {
        let name = name.trim();
        let (base, inline_eps) = match name.find('(') {
            Some(open) => {
                let inner = name[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in '{name}'")))?;
                let v = inner.trim().trim_start_matches("eps=").trim();
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad eps in '{name}'")))?;
                (&name[..open], Some(v))
            }
            None => (name, None),
        };
        let need_eps = || -> Result<Epsilon> {
            let e = inline_eps.or(eps).ok_or_else(|| {
                Error::Parse(format!("{base} requires an eps parameter in (0, 1)"))
            })?;
            Epsilon::new(e)
        };
        match base {
            "V1_SF" => Ok(ClfId::V1Sf),
            "V_SF_STRICT" => Ok(ClfId::VSfStrict),
            "V1_BOTH" => Ok(ClfId::V1Both(need_eps()?)),
            "V_BOTH_STRICT" => Ok(ClfId::VBothStrict(need_eps()?)),
            "V_FORWARDING" => Ok(ClfId::VForwarding),
            "V_BACKSTEPPING" => Ok(ClfId::VBackstepping),
            other => Err(Error::Parse(format!("unknown CLF '{other}'"))),
        }
    }

    /// Strict candidates have a negative definite derivative along their
    /// designated closed loop.
    pub fn is_strict(&self) -> bool {
        !matches!(self, ClfId::V1Sf | ClfId::V1Both(_))
    }

    pub fn model(&self) -> ModelId {
        match self {
            ClfId::V1Both(_) | ClfId::VBothStrict(_) => ModelId::SimultaneousHarvest,
            _ => ModelId::PredatorOnlyHarvest,
        }
    }

    pub fn designated_controllers(&self) -> Vec<ControllerSpec> {
        match self {
            ClfId::V1Sf | ClfId::VSfStrict => vec![ControllerSpec::PredatorLinear],
            ClfId::V1Both(e) | ClfId::VBothStrict(e) => vec![ControllerSpec::MixedLinear(*e)],
            ClfId::VForwarding => vec![ControllerSpec::ForwardingFeedback],
            ClfId::VBackstepping => vec![
                ControllerSpec::BacksteppingConventional,
                ControllerSpec::BacksteppingPositive,
            ],
        }
    }

    pub fn has_decomposition(&self) -> bool {
        matches!(self, ClfId::VForwarding | ClfId::VBackstepping)
    }

    /// All six entries with the given gain for the simultaneous-harvest ones.
    pub fn catalog(eps: Epsilon) -> [ClfId; 6] {
        [
            ClfId::V1Sf,
            ClfId::VSfStrict,
            ClfId::V1Both(eps),
            ClfId::VBothStrict(eps),
            ClfId::VForwarding,
            ClfId::VBackstepping,
        ]
    }
}

impl fmt::Display for ClfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.eps() {
            Some(e) => write!(f, "{}(eps={})", self.base_name(), e.value()),
            None => f.write_str(self.base_name()),
        }
    }
}

impl FromStr for ClfId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ClfId::from_name(s, None)
    }
}

/// A candidate matched with one of its designated feedback laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    clf: ClfId,
    controller: ControllerSpec,
}

impl Pairing {
    pub fn new(clf: ClfId, controller: ControllerSpec) -> Result<Self> {
        let designated = clf.designated_controllers();
        if designated.contains(&controller) {
            Ok(Self { clf, controller })
        } else {
            Err(Error::UnsupportedPairing {
                clf: clf.to_string(),
                controller: controller.to_string(),
                designated: designated
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" or "),
            })
        }
    }

    /// Pairing with an explicit model, rejecting models the pair was not
    /// designed for.
    pub fn with_model(clf: ClfId, model: ModelId, controller: ControllerSpec) -> Result<Self> {
        let p = Self::new(clf, controller)?;
        if p.model() != model {
            return Err(Error::ModelMismatch {
                controller: controller.to_string(),
                model: model.to_string(),
            });
        }
        Ok(p)
    }

    pub fn clf(&self) -> ClfId {
        self.clf
    }

    pub fn controller(&self) -> ControllerSpec {
        self.controller
    }

    pub fn model(&self) -> ModelId {
        self.clf.model()
    }

    /// Every designated pairing for the given simultaneous-harvest gain.
    pub fn all(eps: Epsilon) -> Vec<Pairing> {
        ClfId::catalog(eps)
            .into_iter()
            .flat_map(|id| {
                id.designated_controllers()
                    .into_iter()
                    .map(move |c| Pairing {
                        clf: id,
                        controller: c,
                    })
            })
            .collect()
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} with {}", self.clf, self.controller)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClfEvaluation {
    pub value: f64,
    pub grad_prey: f64,
    pub grad_predator: f64,
}

/// `V' = drift + gain * U` for the predator-only model with arbitrary input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputAffineDecomposition {
    pub drift: f64,
    pub gain: f64,
}

impl InputAffineDecomposition {
    pub fn derivative(&self, input: f64) -> f64 {
        self.drift + self.gain * input
    }

    /// No positive input makes the derivative negative.
    pub fn fails_for_positive_input(&self) -> bool {
        self.drift > 0.0 && self.gain > 0.0
    }
}

pub fn value(id: ClfId, s: PopulationState) -> f64 {
    let (x, y) = (s.prey(), s.predator());
    match id {
        ClfId::V1Sf => psi_unchecked(x) + psi_unchecked(y),
        ClfId::VSfStrict => {
            let d = x - 1.0;
            d * d / x + psi_unchecked(y) + psi_unchecked(y / x)
        }
        ClfId::V1Both(e) => psi_unchecked(x) + (1.0 + e.value()) * psi_unchecked(y),
        ClfId::VBothStrict(e) => {
            let a = e.alpha();
            psi_unchecked(x)
                + (1.0 + e.value()) * psi_unchecked(y)
                + pi_unchecked(x, e)
                + psi_unchecked(y * (-a * x.ln()).exp())
        }
        ClfId::VForwarding => (x / y - 1.0) - x.ln() + (y - 1.0),
        ClfId::VBackstepping => psi_unchecked(1.0 / x) + psi_unchecked(y / x),
    }
}

/// Analytic partial derivatives `(dV/dX, dV/dY)`.
pub fn gradient(id: ClfId, s: PopulationState) -> (f64, f64) {
    let (x, y) = (s.prey(), s.predator());
    let x2 = x * x;
    match id {
        ClfId::V1Sf => (psi_prime(x), psi_prime(y)),
        ClfId::VSfStrict => {
            // Psi(X) + Psi(1/X) = X + 1/X - 2
            let gx = 1.0 - 1.0 / x2 + (x - y) / x2;
            let gy = psi_prime(y) + 1.0 / x - 1.0 / y;
            (gx, gy)
        }
        ClfId::V1Both(e) => (psi_prime(x), (1.0 + e.value()) * psi_prime(y)),
        ClfId::VBothStrict(e) => {
            let a = e.alpha();
            let xa = x.powf(-a);
            let ratio = y * xa;
            let gx = psi_prime(x) + pi_prime_unchecked(x, e) - a * (ratio - 1.0) / x;
            let gy = (1.0 + e.value()) * psi_prime(y) + xa - 1.0 / y;
            (gx, gy)
        }
        ClfId::VForwarding => (1.0 / y - 1.0 / x, 1.0 - x / (y * y)),
        ClfId::VBackstepping => ((2.0 * x - 1.0 - y) / x2, 1.0 / x - 1.0 / y),
    }
}

pub fn evaluate(id: ClfId, s: PopulationState) -> ClfEvaluation {
    let (gx, gy) = gradient(id, s);
    ClfEvaluation {
        value: value(id, s),
        grad_prey: gx,
        grad_predator: gy,
    }
}

/// The same candidates written through `Phi`, `Pi`, and log coordinates.
/// Evaluated independently of [`value`].
pub fn value_in_log_coordinates(id: ClfId, ls: LogState) -> f64 {
    let (x, y) = (ls.x, ls.y);
    match id {
        ClfId::V1Sf => phi_big(x) + phi_big(y),
        ClfId::VSfStrict => phi_big(x) + phi_big(-x) + phi_big(y) + phi_big(y - x),
        ClfId::V1Both(e) => phi_big(x) + (1.0 + e.value()) * phi_big(y),
        ClfId::VBothStrict(e) => {
            let a = e.alpha();
            let pi = (-a * x).exp() * (phi(x) - phi(a * x) / a);
            phi_big(x) + (1.0 + e.value()) * phi_big(y) + pi + phi_big(y - a * x)
        }
        ClfId::VForwarding => {
            let c = coordinate_maps_log(ls);
            phi_big(c.0) + phi_big(-c.1)
        }
        ClfId::VBackstepping => phi_big(-x) + phi_big(y - x),
    }
}

fn coordinate_maps_log(ls: LogState) -> (f64, f64) {
    let eta = -ls.y;
    (ls.x + eta, eta)
}

/// `<grad V, f(s, U)>` for the given model and input.
pub fn lie_derivative(id: ClfId, model: ModelId, s: PopulationState, input: f64) -> Result<f64> {
    let f = vector_field(model, s, input)?;
    let (gx, gy) = gradient(id, s);
    Ok(gx * f.d_prey + gy * f.d_predator)
}

/// Lie derivative along the pairing's closed loop.
pub fn closed_loop_lie_derivative(p: Pairing, s: PopulationState) -> f64 {
    let u = control(p.controller(), s);
    // inputs of the catalog laws are finite in the open quadrant
    lie_derivative(p.clf(), p.model(), s, u).unwrap_or(f64::NAN)
}

/// Closed-form derivative along the pairing's closed loop.
pub fn closed_form_vdot(p: Pairing, s: PopulationState) -> f64 {
    let (x, y) = (s.prey(), s.predator());
    let dx = x - 1.0;
    let dy = y - 1.0;
    match (p.clf(), p.controller()) {
        (ClfId::V1Sf, _) => -dy * dy,
        (ClfId::VSfStrict, _) => -dx * dx / x - dy * dy,
        (ClfId::V1Both(e), _) => {
            let e = e.value();
            -(1.0 + e) * e * dy * dy
        }
        (ClfId::VBothStrict(e), _) => {
            let ev = e.value();
            strictifier_both_expected(x, e) - (1.0 + ev) * ev * dy * dy
        }
        (ClfId::VForwarding, _) => {
            let r = x / y;
            -0.5 * ((r - 1.0).powi(2) + dy * dy + (r - y).powi(2))
        }
        (ClfId::VBackstepping, ControllerSpec::BacksteppingConventional) => {
            -dx * dx / x - (y - x).powi(2) / (x * y)
        }
        (ClfId::VBackstepping, _) => -dx * dx / x - (y - x).powi(2) / x * (y / x),
    }
}

/// `-4 [sinh^2(x/2) + e^{y+z} sinh^2(z/2)]`, the derivative of the
/// backstepping candidate under `U = Y^2/X` in `(x, y, z)` coordinates.
pub fn backstepping_vdot_sinh(s: PopulationState) -> f64 {
    let c = coordinate_maps(s);
    let (x, y, z) = (c.log.x, c.log.y, c.backstepping.z);
    let sx = (0.5 * x).sinh();
    let sz = (0.5 * z).sinh();
    -4.0 * (sx * sx + (y + z).exp() * sz * sz)
}

/// Drift and input gain of the derivative along the predator-only model.
pub fn input_affine_lg(id: ClfId, s: PopulationState) -> Result<InputAffineDecomposition> {
    let (x, y) = (s.prey(), s.predator());
    match id {
        ClfId::VForwarding => Ok(InputAffineDecomposition {
            drift: -x * x / y + x / y - x + y - 1.0 + x * y,
            gain: x / y - y,
        }),
        ClfId::VBackstepping => Ok(InputAffineDecomposition {
            drift: (-(x - 1.0).powi(2) + y * (y - x)) / x,
            gain: (x - y) / x,
        }),
        other => Err(Error::NoDecomposition(other.to_string())),
    }
}

/// The strictifying part `Pi(X) + Psi(Y/X^alpha)` of the simultaneous-harvest
/// candidate: value and gradient.
pub fn strictifier_both(eps: Epsilon, s: PopulationState) -> ClfEvaluation {
    let (x, y) = (s.prey(), s.predator());
    let a = eps.alpha();
    let xa = x.powf(-a);
    let ratio = y * xa;
    ClfEvaluation {
        value: pi_unchecked(x, eps) + psi_unchecked(ratio),
        grad_prey: pi_prime_unchecked(x, eps) - a * (ratio - 1.0) / x,
        grad_predator: xa - 1.0 / y,
    }
}

/// Derivative of the strictifying part along the mixed-harvest closed loop,
/// computed from its gradient and the vector field.
pub fn strictifier_both_lie_derivative(eps: Epsilon, s: PopulationState) -> f64 {
    let ev = strictifier_both(eps, s);
    let u = control(ControllerSpec::MixedLinear(eps), s);
    match vector_field(ModelId::SimultaneousHarvest, s, u) {
        Ok(f) => ev.grad_prey * f.d_prey + ev.grad_predator * f.d_predator,
        Err(_) => f64::NAN,
    }
}

/// `-(X - 1)(X^alpha - 1)/X^alpha`: what remains of the strictifier's
/// derivative once the `(Y - 1)` cross term cancels.
pub fn strictifier_both_expected(x: f64, eps: Epsilon) -> f64 {
    let a = eps.alpha();
    let lx = x.ln();
    -(x - 1.0) * (a * lx).exp_m1() * (-a * lx).exp()
}

/// Smallest `c` with `V' <= -c |s - (1,1)|^2` over a ring of sampled states
/// at radii up to `radius` around the equilibrium.
pub fn local_quadratic_rate(p: Pairing, radius: f64, rings: usize, per_ring: usize) -> f64 {
    let mut c = f64::INFINITY;
    for i in 1..=rings {
        let r = radius * i as f64 / rings as f64;
        for k in 0..per_ring {
            let th = std::f64::consts::TAU * k as f64 / per_ring as f64;
            let Ok(s) = PopulationState::new(1.0 + r * th.cos(), 1.0 + r * th.sin()) else {
                continue;
            };
            c = c.min(-closed_form_vdot(p, s) / (r * r));
        }
    }
    c
}

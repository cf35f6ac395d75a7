//! Grid scans and probes that turn catalog claims into checkable reports.
//!
//! Scans certify sampled points only. Each report records the worst sampled
//! state and its margin, so a failure can be re-evaluated in isolation.
//! Reductions pick the worst margin with ties broken by the lower point
//! index, which makes reports independent of how the grid is partitioned.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clf::{
    self, backstepping_vdot_sinh, closed_form_vdot, closed_loop_lie_derivative, input_affine_lg,
    lie_derivative, strictifier_both_expected, strictifier_both_lie_derivative, ClfId, Pairing,
};
use crate::controllers::{control, ControllerSpec, Epsilon};
use crate::dynamics::{
    coordinate_maps, log_vector_field, target_system_field, vector_field, ModelId, PopulationState,
};
use crate::error::{Error, Result};
use crate::oracle;

pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-3;
pub const EQUILIBRIUM_TOL: f64 = 1e-12;

/// Log-spaced tensor grid over `[e^-a, e^a]^2`, symmetric about `(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainGrid {
    pub log_bound: f64,
    pub points_per_axis: usize,
}

impl DomainGrid {
    pub fn new(log_bound: f64, points_per_axis: usize) -> Result<Self> {
        if !(log_bound > 0.0 && log_bound.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "grid-a",
                value: log_bound,
                reason: "log bound must be positive and finite",
            });
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidParameter {
                name: "grid-n",
                value: points_per_axis as f64,
                reason: "at least 2 points per axis are required",
            });
        }
        Ok(Self {
            log_bound,
            points_per_axis,
        })
    }

    /// `a = 3`, `n = 200`.
    pub fn standard() -> Self {
        Self {
            log_bound: 3.0,
            points_per_axis: 200,
        }
    }

    pub fn len(&self) -> usize {
        self.points_per_axis * self.points_per_axis
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Log-coordinate abscissae, exactly antisymmetric about zero.
    pub fn log_axis(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let a = self.log_bound;
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                // mirror pairs share one rounding
                let j = n - 1 - i;
                if i <= j {
                    -a * (j as f64 - i as f64) / last
                } else {
                    a * (i as f64 - j as f64) / last
                }
            })
            .collect()
    }

    pub fn axis(&self) -> Vec<f64> {
        self.log_axis().into_iter().map(f64::exp).collect()
    }

    /// Row-major: prey varies fastest.
    pub fn points(&self) -> Vec<PopulationState> {
        let axis = self.axis();
        let mut out = Vec::with_capacity(self.len());
        for &y in &axis {
            for &x in &axis {
                out.push(PopulationState::new(x, y).expect("grid points are positive"));
            }
        }
        out
    }

    /// Grid points plus the two lines `X = 1` and `Y = 1` sampled at the
    /// grid abscissae, where semidefinite derivatives vanish.
    pub fn points_with_crosshair(&self) -> Vec<PopulationState> {
        let mut pts = self.points();
        for x in self.axis() {
            pts.push(PopulationState::new(x, 1.0).expect("positive"));
            pts.push(PopulationState::new(1.0, x).expect("positive"));
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub verdict: Verdict,
    pub worst_point: [f64; 2],
    pub margin: f64,
    pub points: usize,
    pub params: BTreeMap<String, Value>,
}

impl VerificationReport {
    pub fn new(
        check: impl Into<String>,
        passed: bool,
        worst: PopulationState,
        margin: f64,
        points: usize,
    ) -> Self {
        Self {
            check: check.into(),
            verdict: if passed { Verdict::Pass } else { Verdict::Fail },
            worst_point: worst.as_array(),
            margin,
            points,
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn worst_state(&self) -> PopulationState {
        PopulationState::new(self.worst_point[0], self.worst_point[1])
            .expect("reported states are inside the quadrant")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<28} {:<4} margin={:+.3e} worst=({:.6}, {:.6}) points={}",
            self.check,
            if self.passed() { "PASS" } else { "FAIL" },
            self.margin,
            self.worst_point[0],
            self.worst_point[1],
            self.points
        )
    }
}

fn badness_key(b: f64) -> f64 {
    if b.is_nan() {
        f64::INFINITY
    } else {
        b
    }
}

fn pick_worse(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    match badness_key(a.0).total_cmp(&badness_key(b.0)) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Largest badness over `points` (skipping `None`) with its index, and the
/// number of points evaluated.
fn worst_over<F>(points: &[PopulationState], badness: F) -> (Option<(f64, usize)>, usize)
where
    F: Fn(PopulationState) -> Option<f64> + Sync,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, &s)| match badness(s) {
            Some(b) => (Some((b, i)), 1usize),
            None => (None, 0),
        })
        .reduce(
            || (None, 0),
            |(wa, ca), (wb, cb)| {
                let w = match (wa, wb) {
                    (Some(a), Some(b)) => Some(pick_worse(a, b)),
                    (a, None) => a,
                    (None, b) => b,
                };
                (w, ca + cb)
            },
        )
}

fn outside_ball(s: PopulationState, radius: f64) -> bool {
    s.distance_to_equilibrium() > radius
}

/// Positive definiteness of an arbitrary candidate on the grid.
pub fn scan_positive_definite_fn<F>(
    name: &str,
    candidate: F,
    grid: &DomainGrid,
    exclusion_radius: f64,
) -> VerificationReport
where
    F: Fn(PopulationState) -> f64 + Sync,
{
    let pts = grid.points_with_crosshair();
    let (worst, count) = worst_over(&pts, |s| {
        outside_ball(s, exclusion_radius).then(|| -candidate(s))
    });
    let at_eq = candidate(PopulationState::EQUILIBRIUM);
    let eq_ok = at_eq.abs() < EQUILIBRIUM_TOL;
    let (passed, worst_state, margin) = match worst {
        // a non-positive (or NaN) value outside the ball
        Some((b, i)) if !(b < 0.0) => (false, pts[i], -b),
        Some((b, i)) if eq_ok => (true, pts[i], -b),
        _ => (eq_ok, PopulationState::EQUILIBRIUM, -at_eq.abs()),
    };
    VerificationReport::new("positive_definite", passed, worst_state, margin, count)
        .param("candidate", name)
        .param("grid_a", grid.log_bound)
        .param("grid_n", grid.points_per_axis as u64)
        .param("exclusion_radius", exclusion_radius)
        .param("value_at_equilibrium", at_eq)
        .param(
            "pass_if",
            "min value outside exclusion ball > 0 and |V(1,1)| < 1e-12",
        )
        .param("certifies", "sampled grid points only")
}

pub fn scan_positive_definite(id: ClfId, grid: &DomainGrid) -> VerificationReport {
    scan_positive_definite_with(id, grid, DEFAULT_EXCLUSION_RADIUS)
}

pub fn scan_positive_definite_with(
    id: ClfId,
    grid: &DomainGrid,
    exclusion_radius: f64,
) -> VerificationReport {
    scan_positive_definite_fn(
        &id.to_string(),
        |s| clf::value(id, s),
        grid,
        exclusion_radius,
    )
}

/// Negativity of the closed-loop Lie derivative on the grid.
pub fn scan_vdot_negative(
    id: ClfId,
    model: ModelId,
    ctrl: ControllerSpec,
    grid: &DomainGrid,
) -> Result<VerificationReport> {
    scan_vdot_negative_with(id, model, ctrl, grid, DEFAULT_EXCLUSION_RADIUS)
}

pub fn scan_vdot_negative_with(
    id: ClfId,
    model: ModelId,
    ctrl: ControllerSpec,
    grid: &DomainGrid,
    exclusion_radius: f64,
) -> Result<VerificationReport> {
    let pairing = Pairing::with_model(id, model, ctrl)?;
    let pts = grid.points_with_crosshair();
    let (worst, count) = worst_over(&pts, |s| {
        outside_ball(s, exclusion_radius).then(|| closed_loop_lie_derivative(pairing, s))
    });
    let (passed, state, margin) = match worst {
        Some((b, i)) => (b < 0.0, pts[i], b),
        None => (true, PopulationState::EQUILIBRIUM, 0.0),
    };
    Ok(
        VerificationReport::new("vdot_negative", passed, state, margin, count)
            .param("pairing", pairing.to_string())
            .param("model", model.name())
            .param("grid_a", grid.log_bound)
            .param("grid_n", grid.points_per_axis as u64)
            .param("exclusion_radius", exclusion_radius)
            .param("pass_if", "max Lie derivative outside exclusion ball < 0")
            .param("certifies", "sampled grid points only"),
    )
}

/// Semidefinite derivative along the closed loop: `V' <= 0` everywhere.
pub fn scan_vdot_nonpositive(
    id: ClfId,
    model: ModelId,
    ctrl: ControllerSpec,
    grid: &DomainGrid,
) -> Result<VerificationReport> {
    let pairing = Pairing::with_model(id, model, ctrl)?;
    let pts = grid.points_with_crosshair();
    let (worst, count) = worst_over(&pts, |s| Some(closed_loop_lie_derivative(pairing, s)));
    let (b, i) = worst.expect("grid is non-empty");
    Ok(
        VerificationReport::new("vdot_nonpositive", b <= 0.0, pts[i], b, count)
            .param("pairing", pairing.to_string())
            .param("grid_a", grid.log_bound)
            .param("grid_n", grid.points_per_axis as u64)
            .param("pass_if", "max Lie derivative <= 0"),
    )
}

/// A state away from the equilibrium where a non-strict candidate's
/// derivative vanishes.
pub fn nonstrict_witness(
    id: ClfId,
    model: ModelId,
    ctrl: ControllerSpec,
) -> Result<PopulationState> {
    let pairing = Pairing::with_model(id, model, ctrl)?;
    if id.is_strict() {
        return Err(Error::NoWitness(id.to_string()));
    }
    // both non-strict derivatives are multiples of -(Y - 1)^2
    let candidates = [2.0, 3.0, 0.25, 5.0, 10.0];
    candidates
        .iter()
        .filter_map(|&x| PopulationState::new(x, 1.0).ok())
        .find(|&s| {
            closed_loop_lie_derivative(pairing, s).abs() < 1e-12
                && s.distance_to_equilibrium() > 0.5
        })
        .ok_or_else(|| Error::NoWitness(id.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionLabel {
    /// The controller prescribes `U < 0`.
    pub u_negative: bool,
    /// `L > 0` and `G > 0`: no positive input decreases the candidate.
    pub clf_failure: bool,
}

pub fn classify_point(ctrl: ControllerSpec, id: ClfId, s: PopulationState) -> Result<RegionLabel> {
    let lg = input_affine_lg(id, s)?;
    Ok(RegionLabel {
        u_negative: control(ctrl, s) < 0.0,
        clf_failure: lg.fails_for_positive_input(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub grid: DomainGrid,
    pub controller: ControllerSpec,
    pub clf: ClfId,
    pub points: Vec<PopulationState>,
    pub labels: Vec<RegionLabel>,
}

impl RegionMap {
    pub fn count_u_negative(&self) -> usize {
        self.labels.iter().filter(|l| l.u_negative).count()
    }

    pub fn count_clf_failure(&self) -> usize {
        self.labels.iter().filter(|l| l.clf_failure).count()
    }

    /// Label of the grid point nearest to `s` in log coordinates.
    pub fn nearest_label(&self, s: PopulationState) -> RegionLabel {
        let axis = self.grid.log_axis();
        let nearest = |v: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        let l = s.to_log();
        let (i, j) = (nearest(l.x), nearest(l.y));
        self.labels[j * self.grid.points_per_axis + i]
    }

    /// `X,Y,u_negative,clf_failure` raster.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("X,Y,u_negative,clf_failure\n");
        for (s, l) in self.points.iter().zip(&self.labels) {
            out.push_str(&format!(
                "{:.16e},{:.16e},{},{}\n",
                s.prey(),
                s.predator(),
                l.u_negative as u8,
                l.clf_failure as u8
            ));
        }
        out
    }
}

/// Labels every grid point by the sign of the controller and by membership
/// in the positive-input failure set of the candidate.
pub fn classify_regions(grid: &DomainGrid, ctrl: ControllerSpec, id: ClfId) -> Result<RegionMap> {
    if !id.has_decomposition() {
        return Err(Error::NoDecomposition(id.to_string()));
    }
    ctrl.ensure_targets(ModelId::PredatorOnlyHarvest)?;
    let points = grid.points();
    let labels = points
        .par_iter()
        .map(|&s| classify_point(ctrl, id, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionMap {
        grid: *grid,
        controller: ctrl,
        clf: id,
        points,
        labels,
    })
}

/// `count` unit directions in log space at angles `2 pi k / count`.
pub fn uniform_rays(count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / count as f64;
            (th.cos(), th.sin())
        })
        .collect()
}

pub const RAY_REACH: f64 = 30.0;

/// Growth demanded at the end of a ray of log-length `reach`. The slowest
/// divergence in the catalog is logarithmic in the state (`-ln S` as
/// `S -> 0`), i.e. linear in log-length, so the floor is linear in `reach`.
pub fn ray_growth_floor(reach: f64) -> f64 {
    (0.5 * reach).min(1e6)
}

/// Radial unboundedness probe for an arbitrary candidate.
pub fn ray_unboundedness_probe_fn<F>(
    name: &str,
    candidate: F,
    rays: &[(f64, f64)],
    steps: usize,
) -> VerificationReport
where
    F: Fn(PopulationState) -> f64,
{
    let steps = steps.max(2);
    let floor = ray_growth_floor(RAY_REACH);
    let mut passed = true;
    let mut worst: Option<(f64, PopulationState)> = None;
    let mut evaluated = 0;
    for &(dx, dy) in rays {
        let norm = dx.hypot(dy);
        let (ux, uy) = (dx / norm, dy / norm);
        let state_at = |k: usize| {
            let r = RAY_REACH * k as f64 / steps as f64;
            PopulationState::new((r * ux).exp(), (r * uy).exp())
        };
        let mut prev: Option<f64> = None;
        let mut ray_margin = f64::INFINITY;
        let mut ray_state = PopulationState::EQUILIBRIUM;
        for k in 1..=steps {
            let Ok(s) = state_at(k) else {
                break;
            };
            let v = candidate(s);
            evaluated += 1;
            if let Some(p) = prev {
                let inc = v - p;
                if !(inc > 0.0) {
                    passed = false;
                    if inc < ray_margin || inc.is_nan() {
                        ray_margin = inc;
                        ray_state = s;
                    }
                }
            }
            prev = Some(v);
            if k == steps {
                let excess = v - floor;
                if !(excess >= 0.0) {
                    passed = false;
                }
                if ray_margin.is_infinite() || (excess < ray_margin && ray_margin >= 0.0) {
                    ray_margin = excess;
                    ray_state = s;
                }
            }
        }
        if worst.is_none_or(|(m, _)| ray_margin < m || ray_margin.is_nan()) {
            worst = Some((ray_margin, ray_state));
        }
    }
    let (margin, state) = worst.unwrap_or((0.0, PopulationState::EQUILIBRIUM));
    VerificationReport::new("ray_unboundedness", passed, state, margin, evaluated)
        .param("candidate", name)
        .param("rays", rays.len() as u64)
        .param("steps", steps as u64)
        .param("reach_log_units", RAY_REACH)
        .param("growth_floor", floor)
        .param(
            "pass_if",
            "strictly increasing along every ray and final value >= growth_floor",
        )
}

pub fn ray_unboundedness_probe(id: ClfId, rays: &[(f64, f64)], steps: usize) -> VerificationReport {
    ray_unboundedness_probe_fn(&id.to_string(), |s| clf::value(id, s), rays, steps)
}

/// What is left of the strictifier's derivative after removing
/// `-(X - 1)(X^alpha - 1)/X^alpha`; zero when the cross terms cancel.
pub fn cross_term_residue(eps: Epsilon, s: PopulationState) -> f64 {
    (strictifier_both_lie_derivative(eps, s) - strictifier_both_expected(s.prey(), eps)).abs()
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Aggregate of the catalog consistency checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub summary: VerificationReport,
    pub checks: Vec<VerificationReport>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.summary.passed()
    }

    pub fn check(&self, name: &str) -> Option<&VerificationReport> {
        self.checks.iter().find(|c| c.check == name)
    }
}

pub const SWEEP_EPS: [f64; 3] = [0.1, 0.5, 0.9];
pub const TOL_IDENTITY: f64 = 1e-10;
pub const TOL_GRADIENT: f64 = 1e-6;
pub const TOL_QUADRATURE: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-6;
pub const TEST_INPUTS: [f64; 5] = [-1.0, 0.0, 0.5, 1.0, 2.0];

fn error_check<F>(name: &str, pts: &[PopulationState], tol: f64, err: F) -> VerificationReport
where
    F: Fn(PopulationState) -> f64 + Sync,
{
    let (worst, count) = worst_over(pts, |s| Some(err(s)));
    let (b, i) = worst.unwrap_or((0.0, 0));
    let state = pts.get(i).copied().unwrap_or(PopulationState::EQUILIBRIUM);
    VerificationReport::new(name, b <= tol, state, b, count)
        .param("tolerance", tol)
        .param("pass_if", "max error <= tolerance")
}

fn sweep_eps() -> Vec<Epsilon> {
    SWEEP_EPS
        .iter()
        .map(|&e| Epsilon::new(e).expect("sweep gains are valid"))
        .collect()
}

/// Relative error of the analytic gradient against centered differences.
pub fn gradient_fd_error(id: ClfId, s: PopulationState, h: f64) -> f64 {
    let (gx, gy) = clf::gradient(id, s);
    let (x, y) = (s.prey(), s.predator());
    let v = |a: f64, b: f64| match PopulationState::new(a, b) {
        Ok(p) => clf::value(id, p),
        Err(_) => f64::NAN,
    };
    let fx = oracle::central_difference(|t| v(t, y), x, h);
    let fy = oracle::central_difference(|t| v(x, t), y, h);
    let norm = gx.hypot(gy);
    let diff = (fx - gx).hypot(fy - gy);
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Relative error between the closed-form Lie derivative and `<grad V, f>`.
pub fn closed_form_error(p: Pairing, s: PopulationState) -> f64 {
    rel_err(closed_form_vdot(p, s), closed_loop_lie_derivative(p, s))
}

/// Worst relative error of `L + G U` against the Lie derivative with
/// constant inputs.
pub fn decomposition_error(id: ClfId, s: PopulationState) -> f64 {
    let Ok(lg) = input_affine_lg(id, s) else {
        return f64::NAN;
    };
    TEST_INPUTS
        .iter()
        .map(|&u| {
            let lie = lie_derivative(id, ModelId::PredatorOnlyHarvest, s, u).unwrap_or(f64::NAN);
            rel_err(lg.derivative(u), lie)
        })
        .fold(0.0, f64::max)
}

/// Target system against the log-coordinate closed loop under `U = Y^2/X`.
pub fn target_pullback_error(s: PopulationState) -> f64 {
    let c = coordinate_maps(s);
    let (tx, tz) = target_system_field(c.backstepping);
    let u = control(ControllerSpec::BacksteppingPositive, s);
    let Ok((dx, dy)) = log_vector_field(ModelId::PredatorOnlyHarvest, c.log, u) else {
        return f64::NAN;
    };
    rel_err(tx, dx).max(rel_err(tz, dy - dx))
}

pub fn log_field_error(model: ModelId, s: PopulationState, u: f64) -> f64 {
    let (Ok(f), Ok((dx, dy))) = (
        vector_field(model, s, u),
        log_vector_field(model, s.to_log(), u),
    ) else {
        return f64::NAN;
    };
    rel_err(dx, f.d_prey / s.prey()).max(rel_err(dy, f.d_predator / s.predator()))
}

/// Runs every catalog consistency check on `grid`.
pub fn consistency_sweep(grid: &DomainGrid) -> SweepReport {
    consistency_sweep_with(grid, |x, e| clf::pi_fn(x, e).unwrap_or(f64::NAN))
}

/// As [`consistency_sweep`], with the closed form of `Pi` supplied by the
/// caller (the quadrature check compares it with its integral form).
pub fn consistency_sweep_with<P>(grid: &DomainGrid, pi_closed_form: P) -> SweepReport
where
    P: Fn(f64, Epsilon) -> f64 + Sync,
{
    let pts = grid.points();
    let eps = sweep_eps();
    let mut checks = Vec::new();

    checks.push(
        error_check("gradient_vs_finite_difference", &pts, TOL_GRADIENT, |s| {
            eps.iter()
                .flat_map(|&e| ClfId::catalog(e))
                .map(|id| gradient_fd_error(id, s, FD_STEP))
                .fold(0.0, f64::max)
        })
        .param("fd_step", FD_STEP),
    );

    checks.push(error_check("closed_form_vdot", &pts, TOL_IDENTITY, |s| {
        eps.iter()
            .flat_map(|&e| Pairing::all(e))
            .map(|p| closed_form_error(p, s))
            .fold(0.0, f64::max)
    }));

    let axis_pts: Vec<PopulationState> = grid
        .axis()
        .into_iter()
        .map(|x| PopulationState::new(x, 1.0).expect("positive"))
        .collect();
    let quad_err = |closed: f64, integral: f64| (closed - integral).abs() / closed.abs().max(1.0);
    checks.push(error_check(
        "psi_quadrature",
        &axis_pts,
        TOL_QUADRATURE,
        |s| {
            let x = s.prey();
            quad_err(clf::psi(x).unwrap_or(f64::NAN), oracle::psi_integral(x))
        },
    ));
    checks.push(error_check(
        "pi_quadrature",
        &axis_pts,
        TOL_QUADRATURE,
        |s| {
            let x = s.prey();
            eps.iter()
                .map(|&e| quad_err(pi_closed_form(x, e), oracle::pi_integral(x, e)))
                .fold(0.0, f64::max)
        },
    ));

    // absolute: the expected remainder vanishes on X = 1
    checks.push(
        error_check("cross_term_cancellation", &pts, TOL_IDENTITY, |s| {
            eps.iter()
                .map(|&e| cross_term_residue(e, s))
                .fold(0.0, f64::max)
        })
        .param("measure", "absolute residue"),
    );

    checks.push(
        error_check("input_affine_identity", &pts, TOL_IDENTITY, |s| {
            decomposition_error(ClfId::VForwarding, s)
                .max(decomposition_error(ClfId::VBackstepping, s))
        })
        .param("inputs", TEST_INPUTS.to_vec()),
    );

    let positive = Pairing::new(ClfId::VBackstepping, ControllerSpec::BacksteppingPositive)
        .expect("designated pairing");
    checks.push(error_check(
        "backstepping_sinh_form",
        &pts,
        TOL_IDENTITY,
        |s| rel_err(backstepping_vdot_sinh(s), closed_form_vdot(positive, s)),
    ));

    checks.push(error_check(
        "target_system_pullback",
        &pts,
        TOL_IDENTITY,
        target_pullback_error,
    ));

    checks.push(error_check(
        "log_coordinate_values",
        &pts,
        TOL_IDENTITY,
        |s| {
            let ls = s.to_log();
            eps.iter()
                .flat_map(|&e| ClfId::catalog(e))
                .map(|id| rel_err(clf::value(id, s), clf::value_in_log_coordinates(id, ls)))
                .fold(0.0, f64::max)
        },
    ));

    checks.push(error_check("log_vector_field", &pts, 1e-12, |s| {
        TEST_INPUTS
            .iter()
            .flat_map(|&u| ModelId::ALL.map(|m| log_field_error(m, s, u)))
            .fold(0.0, f64::max)
    }));

    let failed: Vec<&VerificationReport> = checks.iter().filter(|c| !c.passed()).collect();
    let worst = failed
        .first()
        .map(|c| c.worst_state())
        .unwrap_or(PopulationState::EQUILIBRIUM);
    let summary = VerificationReport::new(
        "consistency_sweep",
        failed.is_empty(),
        worst,
        failed.len() as f64,
        pts.len(),
    )
    .param("grid_a", grid.log_bound)
    .param("grid_n", grid.points_per_axis as u64)
    .param(
        "failed_checks",
        failed.iter().map(|c| c.check.clone()).collect::<Vec<_>>(),
    )
    .param("pass_if", "margin (number of failed sub-checks) == 0");
    SweepReport { summary, checks }
}

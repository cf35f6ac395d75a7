//! Closed- and open-loop simulation.
//!
//! States are integrated in log coordinates `(ln X, ln Y)` and exponentiated
//! on output, so every emitted state lies in the open quadrant without any
//! clipping. The feedback law is evaluated inside the right-hand side.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clf::{self, ClfId, Pairing};
use crate::controllers::{control, ControllerSpec};
use crate::dynamics::{
    coordinate_maps, log_vector_field, open_loop_invariant, target_system_field, BacksteppingState,
    LogState, ModelId, PopulationState,
};
use crate::error::{Error, Result};
use crate::integrator::{self, DenseSolution, StepControl};
use crate::verifier::VerificationReport;

pub const MIN_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    /// Number of uniformly spaced output samples, including both ends.
    pub samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_end: 50.0,
            max_step: 1.0,
            initial_step: None,
            samples: 501,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(t_end: f64, rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: rel_tol * 1e-2,
            t_end,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "tolerance must lie in (0, 1e-2]",
                });
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                value: self.t_end,
                reason: "horizon must be positive and finite",
            });
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "max_step",
                value: self.max_step,
                reason: "must be positive",
            });
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "initial_step",
                    value: h,
                    reason: "must be positive",
                });
            }
        }
        if self.samples < MIN_SAMPLES {
            return Err(Error::InvalidParameter {
                name: "samples",
                value: self.samples as f64,
                reason: "at least 200 output samples are required",
            });
        }
        Ok(())
    }

    fn step_control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            initial_step: self.initial_step,
            ..Default::default()
        }
    }

    fn sample_times(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let last = (n - 1) as f64;
        (0..n).map(move |k| {
            if k == n - 1 {
                self.t_end
            } else {
                self.t_end * k as f64 / last
            }
        })
    }
}

/// Uniformly sampled solution with the applied input and optional CLF series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: ModelId,
    pub controller: ControllerSpec,
    pub times: Vec<f64>,
    pub states: Vec<PopulationState>,
    pub inputs: Vec<f64>,
    pub clf_values: Vec<(ClfId, Vec<f64>)>,
    /// Open-loop invariant `C = X + Y - ln(XY)`, written as column `C`.
    pub invariant: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> PopulationState {
        *self
            .states
            .last()
            .expect("trajectory has at least one sample")
    }

    /// Appends the series of `id` along the samples.
    pub fn with_clf(mut self, id: ClfId) -> Self {
        let series = self.states.iter().map(|&s| clf::value(id, s)).collect();
        self.clf_values.push((id, series));
        self
    }

    pub fn with_invariant(mut self) -> Self {
        self.invariant = Some(
            self.states
                .iter()
                .map(|&s| open_loop_invariant(s))
                .collect(),
        );
        self
    }

    /// `t,X,Y,U,V...` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,X,Y,U");
        for (id, _) in &self.clf_values {
            out.push(',');
            out.push_str(&id.to_string());
        }
        if self.invariant.is_some() {
            out.push_str(",C");
        }
        out.push('\n');
        for k in 0..self.len() {
            let s = self.states[k];
            let _ = write!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k],
                s.prey(),
                s.predator(),
                self.inputs[k]
            );
            for (_, v) in &self.clf_values {
                let _ = write!(out, ",{:.16e}", v[k]);
            }
            if let Some(c) = &self.invariant {
                let _ = write!(out, ",{:.16e}", c[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// Continuous closed-loop solution, kept in log coordinates.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    pub model: ModelId,
    pub controller: ControllerSpec,
    pub solution: DenseSolution<2>,
}

impl DenseTrajectory {
    pub fn state_at(&self, t: f64) -> PopulationState {
        let [x, y] = self.solution.eval(t);
        // the log state is finite on every accepted step
        PopulationState::new(x.exp(), y.exp()).expect("exponentiated state is positive")
    }

    pub fn sample(&self, cfg: &IntegratorConfig) -> Trajectory {
        self.sample_n(cfg, cfg.samples)
    }

    fn sample_n(&self, cfg: &IntegratorConfig, n: usize) -> Trajectory {
        let times: Vec<f64> = cfg.sample_times(n).collect();
        let states: Vec<PopulationState> = times.iter().map(|&t| self.state_at(t)).collect();
        let inputs = states
            .iter()
            .map(|&s| control(self.controller, s))
            .collect();
        Trajectory {
            model: self.model,
            controller: self.controller,
            times,
            states,
            inputs,
            clf_values: Vec::new(),
            invariant: None,
        }
    }
}

pub fn integrate_dense(
    model: ModelId,
    ctrl: ControllerSpec,
    s0: PopulationState,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory> {
    cfg.validate()?;
    ctrl.ensure_targets(model)?;
    let l0 = s0.to_log();
    let rhs = |t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let s = LogState { x: y[0], y: y[1] }
            .to_population()
            .map_err(|_| Error::NonFiniteDerivative { t })?;
        let u = control(ctrl, s);
        let (dx, dy) = log_vector_field(model, LogState { x: y[0], y: y[1] }, u)
            .map_err(|_| Error::NonFiniteDerivative { t })?;
        Ok([dx, dy])
    };
    let solution = integrator::solve(rhs, 0.0, [l0.x, l0.y], cfg.t_end, &cfg.step_control())?;
    Ok(DenseTrajectory {
        model,
        controller: ctrl,
        solution,
    })
}

pub fn integrate(
    model: ModelId,
    ctrl: ControllerSpec,
    s0: PopulationState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    Ok(integrate_dense(model, ctrl, s0, cfg)?.sample(cfg))
}

/// `max_k |C(t_k) - C(0)|` for the open-loop invariant `C = X + Y - ln(XY)`.
pub fn invariant_drift(traj: &Trajectory) -> f64 {
    let Some(&first) = traj.states.first() else {
        return 0.0;
    };
    let c0 = open_loop_invariant(first);
    traj.states
        .iter()
        .map(|&s| (open_loop_invariant(s) - c0).abs())
        .fold(0.0, f64::max)
}

/// Largest per-sample increase of `id` along `traj`; passes when it stays
/// below `1e-9`.
pub fn clf_monotonicity(traj: &Trajectory, id: ClfId) -> Result<VerificationReport> {
    const SLACK: f64 = 1e-9;
    let pairing = Pairing::with_model(id, traj.model, traj.controller)?;
    let series: Vec<f64> = traj.states.iter().map(|&s| clf::value(id, s)).collect();
    let mut worst = (f64::NEG_INFINITY, traj.states[0]);
    for k in 1..series.len() {
        let rise = series[k] - series[k - 1];
        if rise > worst.0 || rise.is_nan() {
            worst = (rise, traj.states[k]);
        }
    }
    if series.len() < 2 {
        worst.0 = 0.0;
    }
    Ok(VerificationReport::new(
        "clf_monotonicity",
        worst.0 <= SLACK,
        worst.1,
        worst.0,
        series.len(),
    )
    .param("pairing", pairing.to_string())
    .param("slack", SLACK)
    .param("pass_if", "max per-sample increase <= slack"))
}

/// First sample time after which the state stays inside the max-norm ball
/// of `radius` around `(1, 1)`, or `None`.
pub fn convergence_time(traj: &Trajectory, radius: f64) -> Option<f64> {
    let mut entered = None;
    for (k, s) in traj.states.iter().enumerate() {
        if s.max_distance_to_equilibrium() < radius {
            entered.get_or_insert(traj.times[k]);
        } else {
            entered = None;
        }
    }
    entered
}

/// Closest return of the orbit to its starting point once it has travelled
/// away from it: `(time, distance)` in `(X, Y)`.
pub fn orbit_recurrence(dense: &DenseTrajectory) -> Option<(f64, f64)> {
    let s0 = dense.state_at(0.0);
    let dist = |t: f64| {
        let s = dense.state_at(t);
        (s.prey() - s0.prey()).hypot(s.predator() - s0.predator())
    };
    let t_end = dense.solution.t_end();
    // sample a few points per accepted step
    let steps: Vec<f64> = dense.solution.step_times().collect();
    let mut ts = Vec::with_capacity(steps.len() * 8);
    for w in steps.windows(2) {
        for j in 0..8 {
            ts.push(w[0] + (w[1] - w[0]) * j as f64 / 8.0);
        }
    }
    ts.push(t_end);
    let ds: Vec<f64> = ts.iter().map(|&t| dist(t)).collect();
    let far = ds.iter().cloned().fold(0.0, f64::max);
    if far == 0.0 {
        return None;
    }
    let away = ds.iter().position(|&d| d > 0.5 * far)?;
    let mut best: Option<(f64, f64)> = None;
    for k in (away + 1)..ts.len().saturating_sub(1) {
        if ds[k] <= ds[k - 1] && ds[k] <= ds[k + 1] {
            let (t, d) = golden_min(&dist, ts[k - 1], ts[k + 1]);
            if best.is_none_or(|b| d < b.1) {
                best = Some((t, d));
            }
        }
    }
    best
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Integrates the backstepping target system in `(x, z)`.
pub fn integrate_target_system(
    s0: PopulationState,
    cfg: &IntegratorConfig,
) -> Result<DenseSolution<2>> {
    cfg.validate()?;
    let b = coordinate_maps(s0).backstepping;
    let rhs = |t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let (dx, dz) = target_system_field(BacksteppingState { x: y[0], z: y[1] });
        if dx.is_finite() && dz.is_finite() {
            Ok([dx, dz])
        } else {
            Err(Error::NonFiniteDerivative { t })
        }
    };
    integrator::solve(rhs, 0.0, [b.x, b.z], cfg.t_end, &cfg.step_control())
}

/// Compares the target system, mapped back to `(X, Y)`, with a direct
/// simulation of the predator-only model under `U = Y^2/X`.
pub fn target_equivalence(
    s0: PopulationState,
    cfg: &IntegratorConfig,
) -> Result<VerificationReport> {
    const GAP_TOL: f64 = 1e-6;
    let direct = integrate_dense(
        ModelId::PredatorOnlyHarvest,
        ControllerSpec::BacksteppingPositive,
        s0,
        cfg,
    )?;
    let target = integrate_target_system(s0, cfg)?;
    let n = cfg.samples.max(2001);
    let mut worst = (0.0_f64, s0);
    for t in cfg.sample_times(n) {
        let [x, z] = target.eval(t);
        let mapped = BacksteppingState { x, z }
            .to_log()
            .to_population()
            .map_err(|_| Error::NonFiniteDerivative { t })?;
        let s = direct.state_at(t);
        let gap = (s.prey() - mapped.prey())
            .abs()
            .max((s.predator() - mapped.predator()).abs());
        if gap > worst.0 || gap.is_nan() {
            worst = (gap, s);
        }
    }
    Ok(
        VerificationReport::new("target_equivalence", worst.0 < GAP_TOL, worst.1, worst.0, n)
            .param("x0", vec![s0.prey(), s0.predator()])
            .param("t_end", cfg.t_end)
            .param("rel_tol", cfg.rel_tol)
            .param("pass_if", "sup-norm gap < 1e-6"),
    )
}

/// `count` initial conditions with `ln X, ln Y` uniform in `[-bound, bound]`,
/// drawn from ChaCha8 seeded with `seed`.
pub fn log_uniform_initial_conditions(seed: u64, count: usize, bound: f64) -> Vec<PopulationState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x: f64 = rng.gen_range(-bound..=bound);
            let y: f64 = rng.gen_range(-bound..=bound);
            PopulationState::new(x.exp(), y.exp()).expect("exp of a finite value is positive")
        })
        .collect()
}

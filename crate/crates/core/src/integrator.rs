//! Dormand-Prince 5(4) with proportional-integral step control and the
//! standard fourth-order continuous extension.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// `None` selects the initial step automatically.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 1_000_000,
        }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    t0: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        std::array::from_fn(|i| {
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }
}

/// Continuous solution over `[t0, t_end]`.
#[derive(Debug, Clone)]
pub struct DenseSolution<const N: usize> {
    segments: Vec<Segment<N>>,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    y_end: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
}

impl<const N: usize> DenseSolution<N> {
    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn final_state(&self) -> [f64; N] {
        self.y_end
    }

    /// Step boundaries, starting with `t0` and ending with `t_end`.
    pub fn step_times(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.t0).chain(self.segments.iter().map(|s| s.t0 + s.h))
    }

    /// Interpolated state; `t` is clamped to the integration interval.
    pub fn eval(&self, t: f64) -> [f64; N] {
        if t <= self.t0 || self.segments.is_empty() {
            return self.y0;
        }
        if t >= self.t_end {
            return self.y_end;
        }
        let idx = self
            .segments
            .partition_point(|s| s.t0 + s.h < t)
            .min(self.segments.len() - 1);
        self.segments[idx].eval(t)
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn error_norm<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    ctl: &StepControl,
) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = ctl.abs_tol + ctl.rel_tol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
pub fn solve<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
) -> Result<DenseSolution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut eval = |t: f64, y: &[f64; N]| -> Result<[f64; N]> {
        let d = f(t, y)?;
        if finite(&d) {
            Ok(d)
        } else {
            Err(Error::NonFiniteDerivative { t })
        }
    };

    let mut sol = DenseSolution {
        segments: Vec::new(),
        t0,
        y0,
        t_end,
        y_end: y0,
        accepted: 0,
        rejected: 0,
    };
    if t_end <= t0 {
        return Ok(sol);
    }

    let span = t_end - t0;
    let max_step = ctl.max_step.min(span);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = eval(t, &y)?;
    let mut h = match ctl.initial_step {
        Some(h) => h.min(max_step),
        None => initial_step(&mut eval, t, &y, &k1, ctl, max_step)?,
    };
    let mut fac_old = 1e-4_f64;
    let mut last_rejected = false;
    let mut steps = 0usize;

    while t < t_end {
        if steps >= ctl.max_steps {
            return Err(Error::TooManySteps { t });
        }
        steps += 1;
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let k2 = eval(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
        let k3 = eval(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = eval(
            t + C4 * h,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        )?;
        let k5 = eval(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = eval(
            t + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        )?;
        let y_new = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = eval(t + h, &y_new)?;

        let err_vec: [f64; N] = std::array::from_fn(|i| {
            h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let err = error_norm(&err_vec, &y, &y_new, ctl);

        let fac11 = err.powf(0.2 - BETA * 0.75);
        if err <= 1.0 {
            let r1 = y;
            let r2: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
            let r3: [f64; N] = std::array::from_fn(|i| h * k1[i] - r2[i]);
            let r4: [f64; N] = std::array::from_fn(|i| r2[i] - h * k7[i] - r3[i]);
            let r5: [f64; N] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            sol.segments.push(Segment {
                t0: t,
                h,
                r: [r1, r2, r3, r4, r5],
            });
            sol.accepted += 1;

            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = err.max(1e-4);
            t = if last { t_end } else { t + h };
            y = y_new;
            k1 = k7;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(max_step);
        } else {
            sol.rejected += 1;
            last_rejected = true;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
    sol.y_end = y;
    Ok(sol)
}

fn initial_step<const N: usize, F>(
    eval: &mut F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    ctl: &StepControl,
    max_step: f64,
) -> Result<f64>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let scale: [f64; N] = std::array::from_fn(|i| ctl.abs_tol + ctl.rel_tol * y[i].abs());
    let norm = |v: &[f64; N]| -> f64 {
        ((0..N).map(|i| (v[i] / scale[i]).powi(2)).sum::<f64>() / N as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(max_step);
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let f1 = eval(t + h0, &y1)?;
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(max_step))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let ctl = StepControl {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let sol = solve(|_, y: &[f64; 1]| Ok([-y[0]]), 0.0, [1.0], 5.0, &ctl).unwrap();
        assert!((sol.final_state()[0] - (-5f64).exp()).abs() < 1e-10);
        // dense output between steps
        for k in 0..50 {
            let t = 0.1 * k as f64 + 0.037;
            assert!((sol.eval(t)[0] - (-t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let ctl = StepControl {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let sol = solve(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            20.0,
            &ctl,
        )
        .unwrap();
        for k in 0..=400 {
            let t = 0.05 * k as f64;
            let y = sol.eval(t);
            assert!(
                (y[0] - t.cos()).abs() < 1e-7 && (y[1] + t.sin()).abs() < 1e-7,
                "t={t}"
            );
        }
        assert!(sol.accepted > 10);
    }

    #[test]
    fn blow_up_reports_failure() {
        let r = solve(
            |_, y: &[f64; 1]| Ok([y[0] * y[0]]),
            0.0,
            [1.0],
            2.0,
            &StepControl::default(),
        );
        assert!(matches!(
            r,
            Err(Error::StepSizeUnderflow { .. })
                | Err(Error::NonFiniteDerivative { .. })
                | Err(Error::TooManySteps { .. })
        ));
        if let Err(Error::StepSizeUnderflow { t }) = r {
            assert!((t - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_span_is_trivial() {
        let sol = solve(
            |_, y: &[f64; 1]| Ok([y[0]]),
            1.0,
            [3.0],
            1.0,
            &StepControl::default(),
        )
        .unwrap();
        assert_eq!(sol.eval(1.0), [3.0]);
        assert_eq!(sol.accepted, 0);
    }
}

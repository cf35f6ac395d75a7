//! Independent reference computations used to cross-check the catalog:
//! adaptive quadrature, integral representations, and finite differences.
//!
//! Nothing here calls the closed forms it is meant to check.

use crate::controllers::Epsilon;

// Gauss-Kronrod 7-15 nodes on [-1, 1] (non-negative half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// Subdivides until the Kronrod-Gauss difference on every piece is below
/// its share of `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: (f64, f64),
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (val, err) = whole;
        if err <= tol || depth == 0 || (b - a).abs() < 1e-15 {
            return val;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        rec(f, a, m, left, 0.5 * tol, depth - 1) + rec(f, m, b, right, 0.5 * tol, depth - 1)
    }
    let whole = gk15(&f, a, b);
    let tol = abs_tol.max(rel_tol * whole.0.abs());
    rec(&f, a, b, whole, tol, 48)
}

const QUAD_ABS: f64 = 1e-15;
const QUAD_REL: f64 = 1e-13;

/// `(S - 1)^2 * int_0^1 (1 - t) / (1 + t (S - 1))^2 dt`.
pub fn psi_integral(s: f64) -> f64 {
    let d = s - 1.0;
    let kernel = |t: f64| (1.0 - t) / (1.0 + t * d).powi(2);
    d * d * integrate(kernel, 0.0, 1.0, QUAD_ABS, QUAD_REL)
}

/// Integral-remainder (Taylor) form of `Pi` about `X = 1`:
/// `(X - 1)^2 * int_0^1 (1 - t) Pi''(1 + t (X - 1)) dt`, with
/// `Pi''(u) = (1 + alpha - alpha u) / ((1 + eps) u^(2 + alpha))`.
///
/// Built from the derivative `Pi'(X) = (X - 1)/((1 + eps) X^(1 + alpha))`
/// and `Pi(1) = 0` alone.
pub fn pi_integral(x: f64, eps: Epsilon) -> f64 {
    let d = x - 1.0;
    let a = eps.alpha();
    let e = eps.value();
    let kernel = |t: f64| {
        let u = 1.0 + t * d;
        (1.0 - t) * (1.0 + a - a * u) / ((1.0 + e) * u.powf(2.0 + a))
    };
    d * d * integrate(kernel, 0.0, 1.0, QUAD_ABS, QUAD_REL)
}

/// Centered difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_on_known_integrals() {
        let v = integrate(|t| t.exp(), 0.0, 1.0, 1e-15, 1e-14);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
        let v = integrate(|t| 1.0 / (1e-3 + t), 0.0, 1.0, 1e-15, 1e-13);
        assert!((v - (1.001f64 / 1e-3).ln()).abs() < 1e-11);
        let v = integrate(|t| (t * std::f64::consts::PI).sin(), 0.0, 1.0, 1e-15, 1e-14);
        assert!((v - 2.0 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn psi_integral_matches_direct_formula() {
        for &s in &[0.05, 0.5, 2.0, std::f64::consts::E, 20.0] {
            let direct = s - 1.0 - f64::ln(s);
            assert!(
                (psi_integral(s) - direct).abs() < 1e-12 * direct.max(1.0),
                "S={s}"
            );
        }
    }
}

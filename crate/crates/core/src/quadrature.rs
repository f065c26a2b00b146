//! Adaptive Gauss–Kronrod (G7/K15) quadrature with global bisection.
//!
//! Error estimation follows QUADPACK's `qk15`: the raw Gauss/Kronrod difference is
//! rescaled by the integrand's mean deviation and floored at the rounding level.

#![allow(clippy::excessive_precision)]

use crate::{Error, Result};

/// Default absolute tolerance used across the crate.
pub const DEFAULT_ABS_TOL: f64 = 1e-12;

const MAX_INTERVALS: usize = 2000;

// Kronrod abscissae on [-1, 1]; odd indices (1, 3, 5) and the centre are Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<f64>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx)?;
        let f2 = f(centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// Bisects the panel with the largest error estimate until the summed estimate
/// drops below the tolerance. Returns [`Error::Quadrature`] with the achieved
/// error when the panel budget runs out.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let min_width = 4.0 * f64::EPSILON * (b - a).abs();
    let mut panels = vec![kronrod15(&f, a, b)?];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= abs_tol {
            return Ok(QuadResult {
                value,
                error,
                intervals: panels.len(),
            });
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                estimate: value,
                achieved: error,
                requested: abs_tol,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if (p.b - p.a).abs() < min_width || mid <= p.a.min(p.b) || mid >= p.a.max(p.b) {
            // Further bisection only chases a singularity.
            return Err(Error::Quadrature {
                estimate: value,
                achieved: error,
                requested: abs_tol,
            });
        }
        panels.push(kronrod15(&f, p.a, mid)?);
        panels.push(kronrod15(&f, mid, p.b)?);
    }
}

/// Like [`integrate`] for an infallible integrand.
pub fn integrate_fn<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    integrate(|x| Ok(f(x)), a, b, abs_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kronrod_weights_sum_to_interval_length() {
        let s: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((s - 2.0).abs() < 1e-15);
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn polynomials_are_exact() {
        // K15 integrates degree 22 exactly; x^10 on [0, 1] = 1/11
        let r = integrate_fn(|x| x.powi(10), 0.0, 1.0, 1e-14).unwrap();
        assert!((r.value - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_trig_square() {
        let k = 2.0 * PI;
        let r = integrate_fn(|x| (k * x).cos().powi(2), 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - 0.5).abs() < 1e-13);
        let k = 21.0 * PI / 4.0;
        let exact = 0.5 + (2.0 * k).sin() / (4.0 * k);
        let r = integrate_fn(|x| (k * x).cos().powi(2), 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_negate() {
        let r = integrate_fn(f64::exp, 1.0, 0.0, 1e-12).unwrap();
        assert!((r.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn singular_integrand_reports_achieved_error() {
        // 1/x is not integrable at 0
        let err = integrate_fn(|x| 1.0 / x, 0.0, 1.0, 1e-12).unwrap_err();
        match err {
            Error::Quadrature {
                achieved,
                requested,
                ..
            } => assert!(achieved > requested),
            other => panic!("unexpected {other:?}"),
        }
    }
}

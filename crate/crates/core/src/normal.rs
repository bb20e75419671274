//! Standard normal and skew-normal distribution helpers.

use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate in both tails.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile function. `p` must lie in (0, 1).
pub fn quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Shape-to-delta map `alpha / sqrt(1 + alpha^2)` of the skew-normal family.
pub fn skew_delta(alpha: f64) -> f64 {
    alpha / (1.0 + alpha * alpha).sqrt()
}

/// Mean of a standard skew-normal with shape `alpha`.
pub fn skew_normal_mean(alpha: f64) -> f64 {
    skew_delta(alpha) * (2.0 / PI).sqrt()
}

/// Variance of a standard skew-normal with shape `alpha`.
pub fn skew_normal_variance(alpha: f64) -> f64 {
    let d = skew_delta(alpha);
    1.0 - 2.0 * d * d / PI
}

/// Lower integration limit used for the skew-normal CDF; the density is below 1e-30 past it.
const SKEW_LOWER: f64 = -12.0;

/// CDF of SkewNormal(location, scale, alpha) by adaptive Simpson quadrature of
/// `2 phi(t) Phi(alpha t)` over `[-12, (y - location) / scale]`.
pub fn skew_normal_cdf(y: f64, location: f64, scale: f64, alpha: f64) -> f64 {
    let t = (y - location) / scale;
    if t <= SKEW_LOWER {
        return 0.0;
    }
    if t >= -SKEW_LOWER {
        return 1.0;
    }
    let density = |s: f64| 2.0 * pdf(s) * cdf(alpha * s);
    adaptive_simpson(density, SKEW_LOWER, t, 1e-9).clamp(0.0, 1.0)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

//! Maps the response onto the unit interval and back.
//!
//! The default map is `z = Phi((y - [1, x] . beta) / sigma)` with `beta` and
//! `sigma` from an ordinary least squares fit. A uniform density on `z`
//! therefore back-transforms to the OLS Gaussian predictive distribution.
//! A linear map of a fixed `[lower, upper]` interval is available when OLS
//! is not identifiable.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, CdeError, Result};
use crate::normal;

pub const DEFAULT_CLAMP_EPS: f64 = 1e-6;
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformMode {
    Gaussian,
    Bounds { lower: f64, upper: f64 },
}

/// Fitted response transform `G(y | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTransform {
    /// Intercept followed by one slope per feature. Empty in bounds mode.
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub clamp_eps: f64,
    pub mode: TransformMode,
}

/// Which transform to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// OLS Gaussian when identifiable, bounds otherwise.
    #[default]
    Auto,
    Gaussian,
    Bounds,
}

#[derive(Debug, Clone, Copy)]
pub struct TransformOptions {
    pub clamp_eps: f64,
    /// sigma is floored at this fraction of the response range.
    pub sigma_floor: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            clamp_eps: DEFAULT_CLAMP_EPS,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
        }
    }
}

/// Ordinary least squares fit of the response on an intercept plus features.
/// `sigma = sqrt(RSS / (n - p - 1))`.
pub fn fit_ols(data: &Dataset, opts: TransformOptions) -> Result<GaussianTransform> {
    check_eps(opts.clamp_eps)?;
    let (n, p) = (data.n(), data.p());
    if n <= p + 1 {
        return Err(invalid(format!(
            "OLS needs more than {} rows for {p} features, got {n}",
            p + 1
        )));
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            data.features[[i, j - 1]]
        }
    });
    let y = DVector::from_iterator(n, data.response.iter().copied());
    let qr = design.clone().qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * max_diag.max(1e-300)) {
        return Err(CdeError::RankDeficient);
    }
    let qty = qr.q().transpose() * &y;
    let beta = r.solve_upper_triangular(&qty).ok_or(CdeError::RankDeficient)?;
    let resid = &y - &design * &beta;
    let rss = resid.norm_squared();
    let (lo, hi) = data.response_range();
    let floor = opts.sigma_floor * if hi > lo { hi - lo } else { 1.0 };
    let sigma = (rss / (n - p - 1) as f64).sqrt().max(floor);
    Ok(GaussianTransform {
        beta: beta.iter().copied().collect(),
        sigma,
        clamp_eps: opts.clamp_eps,
        mode: TransformMode::Gaussian,
    })
}

/// Linear map of `[lower, upper]` onto the unit interval.
pub fn bounds_transform(lower: f64, upper: f64, clamp_eps: f64) -> Result<GaussianTransform> {
    check_eps(clamp_eps)?;
    if !(upper > lower) {
        return Err(invalid("bounds transform needs lower < upper"));
    }
    Ok(GaussianTransform {
        beta: Vec::new(),
        sigma: upper - lower,
        clamp_eps,
        mode: TransformMode::Bounds { lower, upper },
    })
}

/// Fits the requested transform. Bounds are the training response range
/// widened by 5% on each side.
pub fn fit_transform(
    data: &Dataset,
    kind: TransformKind,
    opts: TransformOptions,
) -> Result<GaussianTransform> {
    let bounds = || {
        let (lo, hi) = extended_range(data.response_range());
        bounds_transform(lo, hi, opts.clamp_eps)
    };
    match kind {
        TransformKind::Gaussian => fit_ols(data, opts),
        TransformKind::Bounds => bounds(),
        TransformKind::Auto if data.n() <= data.p() + 1 => bounds(),
        TransformKind::Auto => fit_ols(data, opts),
    }
}

/// Range widened by 10% in total, split evenly between both ends.
pub fn extended_range((lo, hi): (f64, f64)) -> (f64, f64) {
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(invalid("clamp_eps must lie in (0, 0.5)"))
    }
}

impl GaussianTransform {
    fn check_dim(&self, x: ArrayView1<'_, f64>) -> Result<()> {
        match self.mode {
            TransformMode::Gaussian if x.len() + 1 != self.beta.len() => Err(CdeError::Dimension {
                expected: self.beta.len() - 1,
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Location of the base distribution at `x`: the OLS mean, or the lower bound.
    pub fn location(&self, x: ArrayView1<'_, f64>) -> f64 {
        match self.mode {
            TransformMode::Gaussian => {
                self.beta[0] + x.iter().zip(&self.beta[1..]).map(|(a, b)| a * b).sum::<f64>()
            }
            TransformMode::Bounds { lower, .. } => lower,
        }
    }

    /// `G(y | x)` without clamping.
    pub fn base_cdf(&self, y: f64, x: ArrayView1<'_, f64>) -> f64 {
        match self.mode {
            TransformMode::Gaussian => normal::cdf((y - self.location(x)) / self.sigma),
            TransformMode::Bounds { lower, upper } => ((y - lower) / (upper - lower)).clamp(0.0, 1.0),
        }
    }

    /// `dG/dy` at `y`.
    pub fn jacobian(&self, y: f64, x: ArrayView1<'_, f64>) -> f64 {
        match self.mode {
            TransformMode::Gaussian => normal::pdf((y - self.location(x)) / self.sigma) / self.sigma,
            TransformMode::Bounds { lower, upper } if (lower..=upper).contains(&y) => {
                1.0 / (upper - lower)
            }
            TransformMode::Bounds { .. } => 0.0,
        }
    }

    /// `z = G(y | x)` clamped to `[clamp_eps, 1 - clamp_eps]`.
    pub fn to_unit(&self, y: f64, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.base_cdf(y, x).clamp(self.clamp_eps, 1.0 - self.clamp_eps))
    }

    /// Inverse of [`Self::to_unit`] on the open interval.
    pub fn from_unit(&self, z: f64, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(x)?;
        if !(z > 0.0 && z < 1.0) {
            return Err(CdeError::OutsideUnitInterval(z));
        }
        Ok(match self.mode {
            TransformMode::Gaussian => self.location(x) + self.sigma * normal::quantile(z),
            TransformMode::Bounds { lower, upper } => lower + z * (upper - lower),
        })
    }

    /// Change of variables: a density `f_z` on the unit scale becomes
    /// `f_z * dG/dy` on the response scale.
    pub fn density_to_original(&self, f_z: f64, y: f64, x: ArrayView1<'_, f64>) -> f64 {
        f_z * self.jacobian(y, x)
    }
}

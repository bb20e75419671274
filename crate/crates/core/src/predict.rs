//! Discrete conditional densities on a response grid.
//!
//! Two grids are supported. Quantile grids take `L` equally spaced levels
//! between 0.005 and 0.995 on the unit scale and map them back through the
//! transform; each grid point then represents an equal slice of `z`, so the
//! probabilities are a plain softmax of `q`. Cut-point grids take `L` evenly
//! spaced response values across the training range widened by 10%; each
//! point represents an equal slice of `y`, so `q` is offset by the log of
//! the transform's derivative before the softmax.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CdeError, Result};
use crate::normal;
use crate::qmodel::QModel;
use crate::transform::{extended_range, GaussianTransform, TransformMode};

pub const QUANTILE_LOW: f64 = 0.005;
pub const QUANTILE_HIGH: f64 = 0.995;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Quantile,
    Cutpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub z_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub cdf: Vec<f64>,
}

/// Max-shifted softmax.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_weights.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

impl DensityEstimate {
    /// Normalizes `exp(log_weights)` into probabilities on the given grids.
    pub fn from_log_weights(z_grid: Vec<f64>, y_grid: Vec<f64>, log_weights: &[f64]) -> Result<Self> {
        let l = y_grid.len();
        if l < 2 || z_grid.len() != l || log_weights.len() != l {
            return Err(invalid("density grid needs at least two matching points"));
        }
        if y_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("response grid must be strictly increasing"));
        }
        if log_weights.iter().any(|v| v.is_nan()) || log_weights.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(invalid("log weights must contain a finite value and no NaN"));
        }
        let probabilities = softmax(log_weights);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc.min(1.0)
            })
            .collect();
        cdf[l - 1] = 1.0;
        Ok(Self {
            z_grid,
            y_grid,
            probabilities,
            cdf,
        })
    }

    pub fn len(&self) -> usize {
        self.y_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_grid.is_empty()
    }

    /// Piecewise-linear CDF: 0 below the grid, 1 above it.
    pub fn cdf_at(&self, y: f64) -> f64 {
        let g = &self.y_grid;
        if y < g[0] {
            return 0.0;
        }
        if y >= g[g.len() - 1] {
            return 1.0;
        }
        // first index with g[i] > y; i >= 1 here
        let i = g.partition_point(|&v| v <= y);
        let (y0, y1) = (g[i - 1], g[i]);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        c0 + (c1 - c0) * (y - y0) / (y1 - y0)
    }
}

/// Grid-based conditional density at one (normalized) covariate vector.
///
/// `response_range` is the training response range; cut-point mode needs it.
pub fn predict_grid(
    model: &QModel,
    x: ArrayView1<'_, f64>,
    l: usize,
    mode: GridMode,
    transform: &GaussianTransform,
    response_range: Option<(f64, f64)>,
) -> Result<DensityEstimate> {
    if l < 2 {
        return Err(invalid("grid size must be at least 2"));
    }
    let step = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (l - 1) as f64;
    match mode {
        GridMode::Quantile => {
            let z: Vec<f64> = (0..l).map(|k| step(QUANTILE_LOW, QUANTILE_HIGH, k)).collect();
            let y = z
                .iter()
                .map(|&zl| transform.from_unit(zl, x))
                .collect::<Result<Vec<_>>>()?;
            let q = model.q_grid(&z, x)?;
            DensityEstimate::from_log_weights(z, y, &q)
        }
        GridMode::Cutpoint => {
            let range = response_range.ok_or_else(|| invalid("cut-point grid needs the training response range"))?;
            let (lo, hi) = extended_range(range);
            let y: Vec<f64> = (0..l).map(|k| step(lo, hi, k)).collect();
            let z = y
                .iter()
                .map(|&yl| transform.to_unit(yl, x))
                .collect::<Result<Vec<_>>>()?;
            let q = model.q_grid(&z, x)?;
            let logw: Vec<f64> = q
                .iter()
                .zip(&y)
                .map(|(ql, &yl)| ql + log_jacobian(transform, yl, x))
                .collect();
            DensityEstimate::from_log_weights(z, y, &logw)
        }
    }
}

/// `ln dG/dy`, computed without underflow in the Gaussian tails.
fn log_jacobian(t: &GaussianTransform, y: f64, x: ArrayView1<'_, f64>) -> f64 {
    match t.mode {
        TransformMode::Gaussian => {
            let u = (y - t.location(x)) / t.sigma;
            -0.5 * u * u - 0.5 * (2.0 * std::f64::consts::PI).ln() - t.sigma.ln()
        }
        TransformMode::Bounds { .. } => t.jacobian(y, x).ln(),
    }
}

/// Continuous density on the response scale at each grid point:
/// probability per unit of `z`, times `dG/dy`.
pub fn density_on_y(
    de: &DensityEstimate,
    transform: &GaussianTransform,
    x: ArrayView1<'_, f64>,
) -> Result<Vec<f64>> {
    let z = &de.z_grid;
    let l = z.len();
    let width = |k: usize| -> f64 {
        if k == 0 {
            z[1] - z[0]
        } else if k == l - 1 {
            z[l - 1] - z[l - 2]
        } else {
            0.5 * (z[k + 1] - z[k - 1])
        }
    };
    (0..l)
        .map(|k| {
            let w = width(k);
            if !(w > 0.0) {
                return Err(CdeError::InvalidArgument(format!("degenerate z cell width at grid index {k}")));
            }
            Ok(transform.density_to_original(de.probabilities[k] / w, de.y_grid[k], x))
        })
        .collect()
}

/// Gaussian predictive CDF of the transform itself (the `q = 0` model without discretization).
pub fn base_cdf<'a>(transform: &'a GaussianTransform, x: ArrayView1<'a, f64>) -> impl Fn(f64) -> f64 + 'a {
    let loc = transform.location(x);
    move |y| match transform.mode {
        TransformMode::Gaussian => normal::cdf((y - loc) / transform.sigma),
        TransformMode::Bounds { lower, upper } => ((y - lower) / (upper - lower)).clamp(0.0, 1.0),
    }
}

//! End-to-end pipelines: fit a method on a training set, score it, and run
//! the simulation study, grouped cross-validation and quantile-curve export.

mod curves;
mod cv;
mod study;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::casecontrol::{grid_controls, sample_controls, Objective};
use crate::dataset::{apply_normalization, fit_normalization, Dataset, NormalizationParams};
use crate::error::{invalid, CdeError, Result};
use crate::eval::{crps, crps_divergence, true_cdf, ScoreReport, TrueConditional, DEFAULT_GRID_POINTS};
use crate::fit::{fit_poly_mcc, fit_sgd, FitReport, IrlsOptions, SgdConfig};
use crate::predict::{predict_grid, DensityEstimate, GridMode};
use crate::qmodel::{MlpSpec, PolynomialSpec, QModel};
use crate::transform::{extended_range, fit_transform, GaussianTransform, TransformKind, TransformOptions};

pub use curves::{covariate_sweep, emit_quantile_curves};
pub use cv::{run_cv, CvOutcome, FoldResult};
pub use study::{run_simulation_study, ExperimentConfig, StudyTables};

/// Ridge weight used for the tropical-cyclone application.
pub const APPLICATION_OMEGA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PolyMcc,
    MlpMcc,
    MlpIpp,
    OlsGaussian,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::PolyMcc, Method::MlpMcc, Method::MlpIpp, Method::OlsGaussian];

    /// Legend label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::PolyMcc => "Polynomial M=1",
            Method::MlpMcc => "Deep Learning M=1",
            Method::MlpIpp => "Deep Learning M=10",
            Method::OlsGaussian => "OLS Gaussian",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Method::PolyMcc => "poly-mcc",
            Method::MlpMcc => "mlp-mcc",
            Method::MlpIpp => "mlp-ipp",
            Method::OlsGaussian => "ols-gaussian",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = CdeError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| invalid(format!("unknown method {s:?}; expected one of poly-mcc, mlp-mcc, mlp-ipp, ols-gaussian")))
    }
}

/// Ridge weights tuned for the four scenarios at sizes 200, 1000 and 4000.
/// Other sizes use the nearest tuned size on a log scale.
pub fn default_omega(method: Method, scenario: u8, n: usize) -> f64 {
    let sizes = [200.0f64, 1000.0, 4000.0];
    let slot = (0..3)
        .min_by(|&a, &b| {
            let d = |k: usize| ((n.max(1) as f64).ln() - sizes[k].ln()).abs();
            d(a).total_cmp(&d(b))
        })
        .unwrap_or(0);
    let table: [f64; 3] = match (method, scenario) {
        (Method::OlsGaussian, _) => [0.0; 3],
        (Method::PolyMcc, 1) => [0.025; 3],
        (Method::PolyMcc, 3) => [0.025, 0.01, 0.01],
        (Method::PolyMcc, _) => [0.05; 3],
        (_, 1) => [0.025, 0.002, 0.0025],
        (_, 2) => [0.015, 0.0025, 0.001],
        (_, 3) => [0.0075, 0.001, 0.001],
        (_, _) => [0.01, 0.001, 0.0005],
    };
    table[slot]
}

/// Polynomial shape: `degree` in `z`, covariate powers up to `covariate_order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolyShape {
    pub degree: usize,
    pub covariate_order: usize,
    pub interactions: bool,
}

impl Default for PolyShape {
    fn default() -> Self {
        Self {
            degree: 3,
            covariate_order: 2,
            interactions: false,
        }
    }
}

/// Everything needed to fit one method to one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub method: Method,
    pub omega: f64,
    /// Controls per observation.
    pub controls: usize,
    #[serde(default)]
    pub control_grid: bool,
    #[serde(default)]
    pub poly: PolyShape,
    pub hidden_width: usize,
    pub output_width: usize,
    #[serde(default)]
    pub sgd: SgdConfig,
    #[serde(default)]
    pub transform: TransformKind,
}

impl FitSettings {
    /// Defaults for `method`: one control for the matched approximations,
    /// ten for the Poisson-process one, 30-unit layers.
    pub fn new(method: Method, omega: f64) -> Self {
        Self {
            method,
            omega,
            controls: if method == Method::MlpIpp { 10 } else { 1 },
            control_grid: false,
            poly: PolyShape::default(),
            hidden_width: 30,
            output_width: 30,
            sgd: SgdConfig::default(),
            transform: TransformKind::Auto,
        }
    }
}

/// A fitted pipeline: covariate normalization, base transform and q-model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub method: Method,
    pub omega: f64,
    /// Training feature columns, in model order.
    #[serde(default)]
    pub feature_names: Vec<String>,
    pub normalization: NormalizationParams,
    pub transform: GaussianTransform,
    pub model: QModel,
    /// Training response range (before widening).
    pub response_range: (f64, f64),
    pub report: Option<FitReport>,
}

/// Mixes a seed with a key so that derived streams are independent.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    let mut h = master ^ 0x9e37_79b9_7f4a_7c15;
    for &k in key {
        h = splitmix(h ^ splitmix(k));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl FittedModel {
    /// Fits `settings` to `train`. Only training rows are touched.
    pub fn fit(train: &Dataset, settings: &FitSettings, seed: u64) -> Result<Self> {
        if settings.controls == 0 {
            return Err(invalid("at least one control per observation is required"));
        }
        let normalization = fit_normalization(train)?;
        let xs = apply_normalization(train, &normalization)?;
        let transform = fit_transform(&xs, settings.transform, TransformOptions::default())?;
        let n = xs.n();
        let p = xs.p();
        let z = (0..n)
            .map(|i| transform.to_unit(xs.response[i], xs.row(i)))
            .collect::<Result<Vec<_>>>()?;
        let controls = if settings.control_grid {
            grid_controls(n, settings.controls)?
        } else {
            sample_controls(n, settings.controls, derive_seed(seed, &[1]))?
        };
        let shape = settings.poly;
        let (model, report) = match settings.method {
            Method::OlsGaussian => (QModel::Polynomial(PolynomialSpec::new(1, p, 1, false)?), None),
            Method::PolyMcc => {
                let spec = PolynomialSpec::new(shape.degree, p, shape.covariate_order, shape.interactions)?;
                if settings.controls == 1 {
                    let (s, r) = fit_poly_mcc(&spec, &z, xs.features.view(), &controls, settings.omega, IrlsOptions::default())?;
                    (QModel::Polynomial(s), Some(r))
                } else {
                    let obj = Objective::new(&z, xs.features.view(), &controls, settings.omega)?;
                    let (m, r) = fit_sgd(&QModel::Polynomial(spec), &obj, &sgd_for(settings, n, seed))?;
                    (m, Some(r))
                }
            }
            Method::MlpMcc | Method::MlpIpp => {
                let spec = MlpSpec::init_he(settings.hidden_width, settings.output_width, p, derive_seed(seed, &[2]))?;
                let obj = Objective::new(&z, xs.features.view(), &controls, settings.omega)?;
                let (m, r) = fit_sgd(&QModel::Mlp(spec), &obj, &sgd_for(settings, n, seed))?;
                (m, Some(r))
            }
        };
        Ok(Self {
            method: settings.method,
            omega: settings.omega,
            feature_names: train.column_names.clone(),
            normalization,
            transform,
            model,
            response_range: train.response_range(),
            report,
        })
    }

    pub fn converged(&self) -> bool {
        self.report.as_ref().is_none_or(|r| r.converged)
    }

    /// Scoring bounds: the training range widened by 10%.
    pub fn integration_range(&self) -> (f64, f64) {
        extended_range(self.response_range)
    }

    /// Density estimate at raw (unnormalized) covariates.
    pub fn density(&self, x: ArrayView1<'_, f64>, grid_points: usize, mode: GridMode) -> Result<DensityEstimate> {
        let xs = self.normalization.apply_row(x)?;
        predict_grid(&self.model, xs.view(), grid_points, mode, &self.transform, Some(self.response_range))
    }

    /// Mean CRPS divergence from the true conditionals over `test`, with
    /// cut-point predictions on `grid_points` points.
    pub fn divergence(&self, test: &Dataset, truth: &TrueConditional, grid_points: usize) -> Result<ScoreReport> {
        if truth.len() != test.n() {
            return Err(CdeError::Dimension {
                expected: test.n(),
                got: truth.len(),
            });
        }
        let (l, u) = self.integration_range();
        let scores = (0..test.n())
            .map(|i| {
                let de = self.density(test.row(i), grid_points, GridMode::Cutpoint)?;
                crps_divergence(|y| de.cdf_at(y), |y| true_cdf(truth, i, y).unwrap_or(f64::NAN), l, u, DEFAULT_GRID_POINTS)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreReport::new(scores, DEFAULT_GRID_POINTS, (l, u)))
    }

    /// Mean CRPS of the observed responses of `test`.
    pub fn crps(&self, test: &Dataset, grid_points: usize) -> Result<ScoreReport> {
        if test.n() == 0 {
            return Err(invalid("cannot score an empty test set"));
        }
        let (l, u) = self.integration_range();
        let scores = (0..test.n())
            .map(|i| {
                let de = self.density(test.row(i), grid_points, GridMode::Cutpoint)?;
                crps(|y| de.cdf_at(y), test.response[i], l, u, DEFAULT_GRID_POINTS)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreReport::new(scores, DEFAULT_GRID_POINTS, (l, u)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|source| CdeError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CdeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn sgd_for(settings: &FitSettings, n: usize, seed: u64) -> SgdConfig {
    SgdConfig {
        batch_size: settings.sgd.batch_size.min(n),
        seed: derive_seed(seed, &[3]),
        ..settings.sgd
    }
}

/// Picks the ridge weight with the lowest held-out CRPS. The training set is
/// split 75/25 once; the winner is refit on all of `train`.
pub fn select_omega(
    train: &Dataset,
    settings: &FitSettings,
    grid: &[f64],
    grid_points: usize,
    seed: u64,
) -> Result<(FittedModel, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(invalid("ridge grid is empty"));
    }
    let folds = crate::dataset::kfold_by_group(train, 4, derive_seed(seed, &[4]))?;
    let inner = &folds[0];
    let fit_part = train.subset(&inner.train);
    let hold_part = train.subset(&inner.test);
    let mut scored = Vec::with_capacity(grid.len());
    for &omega in grid {
        let s = FitSettings { omega, ..settings.clone() };
        let score = FittedModel::fit(&fit_part, &s, seed)
            .and_then(|m| m.crps(&hold_part, grid_points))
            .map(|r| r.mean)
            .unwrap_or(f64::INFINITY);
        scored.push((omega, score));
    }
    let best = scored
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(o, _)| o)
        .unwrap_or(grid[0]);
    let fitted = FittedModel::fit(train, &FitSettings { omega: best, ..settings.clone() }, seed)?;
    Ok((fitted, scored))
}

/// Median and quartiles (linear interpolation between order statistics).
pub fn quartiles(values: &[f64]) -> Option<(f64, f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some((at(0.25), at(0.5), at(0.75)))
}

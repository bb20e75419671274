//! The four synthetic benchmark scenarios.
//!
//! * Model 1: `Y = X'b1 + exp(X'b2) e`, `X ~ N(0, I_5)`, `b1 ~ N(0, I_5)`,
//!   `b2 ~ N(0, 0.45 I_5)` redrawn per replicate, `e ~ N(0, 1)`.
//! * Model 2: equal mixture of `10 sin(2 pi X1 X2) + 10 X4 + N(0, 2.25)` and
//!   `20 (X3 - 0.5)^2 + 5 X5 + N(0, 1)`, `X1..X10 ~ U(0, 1)`.
//! * Model 3: equal mixture of `sin(X1) + N(0, 0.09)` and
//!   `2 sin(1.5 X1 + 1) + N(0, 0.64)`, `X1 ~ U(0, 10)`.
//! * Model 4: `10 sin(2 pi X1 X2) + 20 (X3 - 0.5)^2 + 10 X4 + 5 X5 + e`,
//!   `e ~ SkewNormal(0, 1, -5)`, `X1..X10 ~ U(0, 1)`.
//!
//! Every `N(m, v)` above is parameterized by variance.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, CdeError, Result};
use crate::eval::{ConditionalLaw, TrueConditional};

pub const SKEW_ALPHA: f64 = -5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub model: u8,
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Fixed Model 1 coefficients `(b1, b2)` instead of random draws.
    #[serde(default)]
    pub model1_betas: Option<(Vec<f64>, Vec<f64>)>,
}

fn default_train_fraction() -> f64 {
    0.75
}

impl ScenarioConfig {
    pub fn new(model: u8, n: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            seed,
            train_fraction: default_train_fraction(),
            model1_betas: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.model) {
            return Err(CdeError::UnknownModel(self.model));
        }
        if self.n < 8 {
            return Err(invalid("scenarios need n >= 8"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid("train fraction must lie in (0, 1)"));
        }
        if let Some((b1, b2)) = &self.model1_betas {
            if b1.len() != 5 || b2.len() != 5 {
                return Err(invalid("Model 1 coefficients must have length 5"));
            }
        }
        Ok(())
    }
}

/// Replicate-level parameters of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub model: u8,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
}

impl ScenarioParams {
    pub fn p(&self) -> usize {
        covariate_count(self.model)
    }
}

/// Number of covariates of a scenario.
pub fn covariate_count(model: u8) -> usize {
    match model {
        1 => 5,
        3 => 1,
        _ => 10,
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub train: Dataset,
    pub test: Dataset,
    pub test_truth: TrueConditional,
    pub params: ScenarioParams,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws replicate parameters (Model 1 coefficients; empty otherwise).
pub fn draw_params(model: u8, rng: &mut ChaCha8Rng) -> ScenarioParams {
    let (beta1, beta2) = if model == 1 {
        let b1 = (0..5).map(|_| normal(rng)).collect();
        let b2 = (0..5).map(|_| 0.45f64.sqrt() * normal(rng)).collect();
        (b1, b2)
    } else {
        (Vec::new(), Vec::new())
    };
    ScenarioParams { model, beta1, beta2 }
}

/// One covariate row of the scenario's design.
pub fn draw_covariates(model: u8, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match model {
        1 => (0..5).map(|_| normal(rng)).collect(),
        3 => vec![rng.random_range(0.0..10.0)],
        _ => (0..10).map(|_| rng.random::<f64>()).collect(),
    }
}

fn friedman_parts(x: ArrayView1<'_, f64>) -> (f64, f64) {
    (
        10.0 * (2.0 * PI * x[0] * x[1]).sin() + 10.0 * x[3],
        20.0 * (x[2] - 0.5).powi(2) + 5.0 * x[4],
    )
}

fn dot(a: ArrayView1<'_, f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Draws a response for covariates `x` by running the generative recipe.
pub fn draw_response(params: &ScenarioParams, x: ArrayView1<'_, f64>, rng: &mut ChaCha8Rng) -> f64 {
    match params.model {
        1 => dot(x, &params.beta1) + dot(x, &params.beta2).exp() * normal(rng),
        2 => {
            let first = rng.random_bool(0.5);
            let (a, b) = friedman_parts(x);
            if first {
                a + 1.5 * normal(rng)
            } else {
                b + normal(rng)
            }
        }
        3 => {
            let first = rng.random_bool(0.5);
            if first {
                x[0].sin() + 0.3 * normal(rng)
            } else {
                2.0 * (1.5 * x[0] + 1.0).sin() + 0.8 * normal(rng)
            }
        }
        _ => {
            let (a, b) = friedman_parts(x);
            a + b + skew_normal_draw(0.0, 1.0, SKEW_ALPHA, rng)
        }
    }
}

/// True conditional law of the response at `x`.
pub fn conditional_law(params: &ScenarioParams, x: ArrayView1<'_, f64>) -> ConditionalLaw {
    match params.model {
        1 => ConditionalLaw::Normal {
            mean: dot(x, &params.beta1),
            sd: dot(x, &params.beta2).exp(),
        },
        2 => {
            let (a, b) = friedman_parts(x);
            ConditionalLaw::Mixture {
                weight: 0.5,
                mean1: a,
                sd1: 1.5,
                mean2: b,
                sd2: 1.0,
            }
        }
        3 => ConditionalLaw::Mixture {
            weight: 0.5,
            mean1: x[0].sin(),
            sd1: 0.3,
            mean2: 2.0 * (1.5 * x[0] + 1.0).sin(),
            sd2: 0.8,
        },
        _ => {
            let (a, b) = friedman_parts(x);
            ConditionalLaw::SkewNormal {
                location: a + b,
                scale: 1.0,
                alpha: SKEW_ALPHA,
            }
        }
    }
}

fn skew_normal_draw(location: f64, scale: f64, alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let u0 = normal(rng);
    let v = normal(rng);
    location + scale * (delta * u0.abs() + (1.0 - delta * delta).sqrt() * v)
}

/// Skew-normal draws via `delta |U0| + sqrt(1 - delta^2) V`.
pub fn sample_skewnormal(location: f64, scale: f64, alpha: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(scale > 0.0) {
        return Err(invalid("skew-normal scale must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| skew_normal_draw(location, scale, alpha, &mut rng)).collect())
}

/// Simulates a dataset and splits it into train and test parts.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let model = config.model;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = draw_params(model, &mut rng);
    if let Some((b1, b2)) = &config.model1_betas {
        params.beta1 = b1.clone();
        params.beta2 = b2.clone();
    }
    let p = covariate_count(model);
    let n = config.n;
    let mut x = Array2::zeros((n, p));
    for mut row in x.rows_mut() {
        row.assign(&Array1::from(draw_covariates(model, &mut rng)));
    }
    let y: Array1<f64> = x.rows().into_iter().map(|row| draw_response(&params, row, &mut rng)).collect();

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let n_train = ((n as f64 * config.train_fraction).round() as usize).clamp(1, n - 1);
    let (train_idx, test_idx) = idx.split_at(n_train);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let full = Dataset::from_arrays(x, y)?;
    let train = full.subset(&train_idx);
    let test = full.subset(&test_idx);
    let laws = test.features.rows().into_iter().map(|r| conditional_law(&params, r)).collect();
    Ok(Scenario {
        train,
        test,
        test_truth: TrueConditional::new(model, laws)?,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::skew_normal_variance;

    fn moments(v: &[f64]) -> (f64, f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
        let skew = v.iter().map(|a| (a - m).powi(3)).sum::<f64>() / n / var.powf(1.5);
        (m, var, skew)
    }

    #[test]
    fn same_seed_same_dataset() {
        for model in 1..=4 {
            let c = ScenarioConfig::new(model, 200, 42);
            let a = generate(&c).unwrap();
            let b = generate(&c).unwrap();
            assert_eq!(a.train, b.train);
            assert_eq!(a.test, b.test);
            assert_eq!(a.params, b.params);
            assert_eq!(a.train.n(), 150);
            assert_eq!(a.test.n(), 50);
            assert_eq!(a.train.p(), covariate_count(model));
        }
    }

    #[test]
    fn model3_design_and_variance() {
        let s = generate(&ScenarioConfig::new(3, 4000, 1)).unwrap();
        assert!(s.train.features.iter().chain(s.test.features.iter()).all(|&v| (0.0..=10.0).contains(&v)));

        let params = ScenarioParams { model: 3, beta1: vec![], beta2: vec![] };
        let x = ndarray::array![0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws: Vec<f64> = (0..100_000).map(|_| draw_response(&params, x.view(), &mut rng)).collect();
        let (_, var, _) = moments(&draws);
        let expected = 0.25 * (0f64.sin() - 2.0 * 1f64.sin()).powi(2) + 0.365;
        assert!((var - expected).abs() < 0.02 * expected, "{var} vs {expected}");
    }

    #[test]
    fn model1_without_scale_slope_is_homoskedastic() {
        let mut c = ScenarioConfig::new(1, 100_000, 3);
        c.model1_betas = Some((vec![1.0, -0.5, 0.2, 0.0, 2.0], vec![0.0; 5]));
        let s = generate(&c).unwrap();
        let b1 = &s.params.beta1;
        let resid: Vec<f64> = s
            .train
            .features
            .rows()
            .into_iter()
            .zip(s.train.response.iter())
            .map(|(r, y)| y - dot(r, b1))
            .collect();
        let (_, var, _) = moments(&resid);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn model4_error_mean() {
        let e = sample_skewnormal(0.0, 1.0, -5.0, 1_000_000, 8).unwrap();
        let (m, var, _) = moments(&e);
        assert!((m + 0.7824).abs() < 0.005, "{m}");
        assert!((var - 0.3879).abs() < 0.02 * 0.3879);
        assert!((skew_normal_variance(-5.0) - 0.3879).abs() < 1e-4);
    }

    #[test]
    fn skewnormal_shape_cases() {
        let n = 10_000;
        for seed in 0..5 {
            let (_, _, skew) = moments(&sample_skewnormal(0.0, 1.0, -5.0, n, seed).unwrap());
            assert!(skew < 0.0);
        }
        // alpha = 0 reduces to a normal: KS statistic below the 95% bound
        let mut v = sample_skewnormal(1.0, 2.0, 0.0, n, 9).unwrap();
        v.sort_by(f64::total_cmp);
        let ks = v
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let f = crate::normal::cdf((y - 1.0) / 2.0);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.36 / (n as f64).sqrt(), "ks {ks}");
        assert!(sample_skewnormal(0.0, 0.0, 1.0, 3, 0).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(generate(&ScenarioConfig::new(5, 100, 0)), Err(CdeError::UnknownModel(5))));
        assert!(generate(&ScenarioConfig::new(1, 4, 0)).is_err());
        let mut c = ScenarioConfig::new(2, 100, 0);
        c.train_fraction = 1.0;
        assert!(generate(&c).is_err());
    }

    #[test]
    fn truth_follows_test_rows() {
        let s = generate(&ScenarioConfig::new(2, 80, 5)).unwrap();
        assert_eq!(s.test_truth.len(), s.test.n());
        let law = conditional_law(&s.params, s.test.row(3));
        assert_eq!(s.test_truth.laws[3], law);
    }
}

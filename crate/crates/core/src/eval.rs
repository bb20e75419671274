//! CRPS and CRPS divergence by left-endpoint Riemann sums, normalized by
//! the integration range, and the true conditional laws of the synthetic
//! scenarios.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CdeError, Result};
use crate::normal;

pub const DEFAULT_GRID_POINTS: usize = 1000;

fn check_range(l: f64, u: f64, grid_points: usize) -> Result<()> {
    if !(l < u) {
        return Err(invalid(format!("integration range needs l < u, got [{l}, {u}]")));
    }
    if grid_points == 0 {
        return Err(invalid("grid_points must be positive"));
    }
    Ok(())
}

/// Mean of `g` over `grid_points` left endpoints of `[l, u]`, which is the
/// range-normalized Riemann sum of its integral.
fn normalized_riemann(l: f64, u: f64, grid_points: usize, g: impl Fn(f64) -> f64) -> f64 {
    let h = (u - l) / grid_points as f64;
    (0..grid_points).map(|k| g(l + k as f64 * h)).sum::<f64>() / grid_points as f64
}

/// `(1 / (u - l)) * int_l^u (F(y) - 1{y >= y_obs})^2 dy`.
pub fn crps(forecast: impl Fn(f64) -> f64, y_obs: f64, l: f64, u: f64, grid_points: usize) -> Result<f64> {
    check_range(l, u, grid_points)?;
    Ok(normalized_riemann(l, u, grid_points, |y| {
        let step = if y >= y_obs { 1.0 } else { 0.0 };
        let d = forecast(y) - step;
        d * d
    }))
}

/// `(1 / (u - l)) * int_l^u (F(y) - G(y))^2 dy`.
pub fn crps_divergence(
    forecast: impl Fn(f64) -> f64,
    truth: impl Fn(f64) -> f64,
    l: f64,
    u: f64,
    grid_points: usize,
) -> Result<f64> {
    check_range(l, u, grid_points)?;
    Ok(normalized_riemann(l, u, grid_points, |y| {
        let d = forecast(y) - truth(y);
        d * d
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scores: Vec<f64>,
    pub mean: f64,
    pub standard_error: f64,
    pub grid_points: usize,
    pub range: (f64, f64),
}

impl ScoreReport {
    /// Summary of per-unit scores; the standard error is `sd / sqrt(n)`.
    pub fn new(scores: Vec<f64>, grid_points: usize, range: (f64, f64)) -> Self {
        let (mean, standard_error) = mean_se(&scores);
        Self {
            scores,
            mean,
            standard_error,
            grid_points,
            range,
        }
    }
}

/// Arithmetic mean and standard error of the mean (0 for fewer than two values).
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Distribution of the response given one covariate row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ConditionalLaw {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// `weight * N(mean1, sd1^2) + (1 - weight) * N(mean2, sd2^2)`.
    Mixture {
        weight: f64,
        mean1: f64,
        sd1: f64,
        mean2: f64,
        sd2: f64,
    },
    /// `location + SkewNormal(0, scale, alpha)`.
    SkewNormal {
        location: f64,
        scale: f64,
        alpha: f64,
    },
}

impl ConditionalLaw {
    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            ConditionalLaw::Normal { mean, sd } => normal::cdf((y - mean) / sd),
            ConditionalLaw::Mixture {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => weight * normal::cdf((y - mean1) / sd1) + (1.0 - weight) * normal::cdf((y - mean2) / sd2),
            ConditionalLaw::SkewNormal { location, scale, alpha } => {
                normal::skew_normal_cdf(y, location, scale, alpha)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ConditionalLaw::Normal { mean, .. } => mean,
            ConditionalLaw::Mixture {
                weight, mean1, mean2, ..
            } => weight * mean1 + (1.0 - weight) * mean2,
            ConditionalLaw::SkewNormal { location, scale, alpha } => {
                location + scale * normal::skew_normal_mean(alpha)
            }
        }
    }
}

/// True conditional laws for a set of rows generated by one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueConditional {
    pub model: u8,
    pub laws: Vec<ConditionalLaw>,
}

impl TrueConditional {
    pub fn new(model: u8, laws: Vec<ConditionalLaw>) -> Result<Self> {
        if !(1..=4).contains(&model) {
            return Err(CdeError::UnknownModel(model));
        }
        Ok(Self { model, laws })
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }
}

/// `F(y | x_index)` under the scenario's true law.
pub fn true_cdf(tc: &TrueConditional, index: usize, y: f64) -> Result<f64> {
    if !(1..=4).contains(&tc.model) {
        return Err(CdeError::UnknownModel(tc.model));
    }
    let law = tc
        .laws
        .get(index)
        .ok_or_else(|| invalid(format!("row index {index} out of range ({} rows)", tc.len())))?;
    Ok(law.cdf(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn step_at(c: f64) -> impl Fn(f64) -> f64 {
        move |y| if y >= c { 1.0 } else { 0.0 }
    }

    #[test]
    fn perfect_step_forecast() {
        let (l, u) = (0.0, 10.0);
        for &y in &[0.0, 3.3333, 7.1, 9.99] {
            assert!(crps(step_at(y), y, l, u, 1000).unwrap() <= 0.001);
        }
    }

    #[test]
    fn misplaced_step_forecast() {
        let (l, u) = (-2.0, 8.0);
        let cell = (u - l) / 1000.0 / (u - l);
        for &(y, c) in &[(1.0, 3.5), (4.2, 0.1), (-1.0, 7.0)] {
            let s = crps(step_at(c), y, l, u, 1000).unwrap();
            let exact = (y - c).abs() / (u - l);
            assert!((s - exact).abs() <= cell, "{s} vs {exact}");
        }
    }

    #[test]
    fn constant_half_forecast() {
        // indicator is 1 everywhere when y_obs = l: integrand 0.25
        let s = crps(|_| 0.5, 2.0, 2.0, 5.0, 1000).unwrap();
        assert!((s - 0.25).abs() < 1e-12);
    }

    #[test]
    fn divergence_of_steps() {
        let (l, u) = (0.0, 4.0);
        assert_eq!(crps_divergence(step_at(1.0), step_at(1.0), l, u, 1000).unwrap(), 0.0);
        let d = crps_divergence(step_at(1.0), step_at(2.7), l, u, 1000).unwrap();
        assert!((d - 1.7 / 4.0).abs() <= 1.0 / 1000.0);
        let n = |m: f64| move |y: f64| normal::cdf(y - m);
        assert_eq!(crps_divergence(n(1.0), n(1.0), l, u, 1000).unwrap(), 0.0);
    }

    #[test]
    fn invalid_ranges() {
        assert!(crps(|_| 0.5, 0.0, 1.0, 1.0, 1000).is_err());
        assert!(crps_divergence(|_| 0.5, |_| 0.5, 2.0, 1.0, 1000).is_err());
    }

    #[test]
    fn divergence_is_expected_score_gap() {
        let truth = |y: f64| normal::cdf(y);
        let forecast = |y: f64| normal::cdf((y - 0.5) / 1.3);
        let (l, u) = (-6.0, 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let dist = Normal::new(0.0, 1.0).unwrap();
        let draws = 100_000;
        let mut gap = 0.0;
        for _ in 0..draws {
            let y = dist.sample(&mut rng);
            gap += crps(forecast, y, l, u, 1000).unwrap() - crps(truth, y, l, u, 1000).unwrap();
        }
        gap /= draws as f64;
        let div = crps_divergence(forecast, truth, l, u, 1000).unwrap();
        assert!((gap - div).abs() < 0.02 * div, "gap {gap} vs divergence {div}");
    }

    #[test]
    fn true_cdf_cases() {
        let tc = TrueConditional::new(
            1,
            vec![ConditionalLaw::Normal { mean: 2.0, sd: 0.5 }],
        )
        .unwrap();
        assert_eq!(true_cdf(&tc, 0, 2.0).unwrap(), 0.5);
        assert!(true_cdf(&tc, 1, 2.0).is_err());
        let m3 = TrueConditional::new(
            3,
            vec![ConditionalLaw::Mixture {
                weight: 0.5,
                mean1: 0.3,
                sd1: 0.3,
                mean2: -1.2,
                sd2: 0.8,
            }],
        )
        .unwrap();
        assert_eq!(true_cdf(&m3, 0, 1e6).unwrap(), 1.0);
        assert_eq!(true_cdf(&m3, 0, -1e6).unwrap(), 0.0);
        assert!(matches!(TrueConditional::new(7, vec![]), Err(CdeError::UnknownModel(7))));
        let bad = TrueConditional { model: 9, laws: vec![] };
        assert!(true_cdf(&bad, 0, 0.0).is_err());
    }

    #[test]
    fn skew_normal_cdf_matches_monte_carlo() {
        // two-Gaussian representation as an independent sampler
        let alpha = -5.0f64;
        let delta = alpha / (1.0 + alpha * alpha).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let y0 = -0.7824;
        let std = Normal::new(0.0, 1.0).unwrap();
        let below = (0..n)
            .filter(|_| {
                let u0: f64 = std.sample(&mut rng);
                let v: f64 = std.sample(&mut rng);
                delta * u0.abs() + (1.0 - delta * delta).sqrt() * v <= y0
            })
            .count();
        let emp = below as f64 / n as f64;
        let law = ConditionalLaw::SkewNormal {
            location: 0.0,
            scale: 1.0,
            alpha,
        };
        assert!((law.cdf(y0) - emp).abs() < 0.002, "{} vs {emp}", law.cdf(y0));
    }

    #[test]
    fn report_statistics() {
        let r = ScoreReport::new(vec![1.0, 2.0, 3.0, 6.0], 1000, (0.0, 1.0));
        assert_eq!(r.mean, 3.0);
        assert!((r.standard_error - (14.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn divergence_symmetric_nonnegative(m1 in -3.0f64..3.0, s1 in 0.2f64..3.0, m2 in -3.0f64..3.0, s2 in 0.2f64..3.0) {
            let f = |y: f64| normal::cdf((y - m1) / s1);
            let g = |y: f64| normal::cdf((y - m2) / s2);
            let a = crps_divergence(f, g, -8.0, 8.0, 1000).unwrap();
            let b = crps_divergence(g, f, -8.0, 8.0, 1000).unwrap();
            proptest::prop_assert!(a >= 0.0);
            proptest::prop_assert_eq!(a, b);
        }

        #[test]
        fn best_step_is_at_observation(y in 0.5f64..9.5, c in 0.0f64..10.0) {
            let at_obs = crps(step_at(y), y, 0.0, 10.0, 1000).unwrap();
            proptest::prop_assert!(at_obs <= crps(step_at(c), y, 0.0, 10.0, 1000).unwrap());
        }

        #[test]
        fn true_cdf_monotone(a in -20.0f64..20.0, d in 0.0f64..5.0, m in -2.0f64..2.0) {
            let laws = [
                ConditionalLaw::Normal { mean: m, sd: 1.3 },
                ConditionalLaw::Mixture { weight: 0.5, mean1: m, sd1: 1.5, mean2: -m, sd2: 1.0 },
                ConditionalLaw::SkewNormal { location: m, scale: 1.0, alpha: -5.0 },
            ];
            for law in laws {
                proptest::prop_assert!(law.cdf(a + d) >= law.cdf(a) - 1e-8);
            }
        }
    }
}

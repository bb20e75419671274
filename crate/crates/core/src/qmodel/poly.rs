//! Polynomial q-function in the centered unit-scale response.
//!
//! Feature order, for each power `b = 1..=degree` (outermost loop):
//!
//! 1. `(z - 0.5)^b`
//! 2. `(z - 0.5)^b * x_j^o` for `j = 1..=p`, then `o = 1..=covariate_order` (innermost)
//! 3. `(z - 0.5)^b * x_j * x_k` for `j < k`, lexicographic, when interactions are enabled
//!
//! Every feature carries a positive power of `z - 0.5`; covariate-only terms
//! never appear since they cancel in the normalized density.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CdeError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSpec {
    pub degree: usize,
    pub covariate_order: usize,
    pub interactions: bool,
    pub p: usize,
    pub coefficients: Vec<f64>,
}

/// Number of features per power of `z`.
fn terms_per_power(p: usize, covariate_order: usize, interactions: bool) -> usize {
    1 + p * covariate_order + if interactions { p * p.saturating_sub(1) / 2 } else { 0 }
}

/// Length of the feature vector and of the coefficient vector.
pub fn feature_count(degree: usize, p: usize, covariate_order: usize, interactions: bool) -> usize {
    degree * terms_per_power(p, covariate_order, interactions)
}

impl PolynomialSpec {
    /// Zero-coefficient spec.
    pub fn new(degree: usize, p: usize, covariate_order: usize, interactions: bool) -> Result<Self> {
        if degree == 0 {
            return Err(invalid("polynomial degree must be at least 1"));
        }
        if !(1..=2).contains(&covariate_order) {
            return Err(invalid("covariate order must be 1 or 2"));
        }
        Ok(Self {
            degree,
            covariate_order,
            interactions,
            p,
            coefficients: vec![0.0; feature_count(degree, p, covariate_order, interactions)],
        })
    }

    pub fn with_coefficients(mut self, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != self.num_features() {
            return Err(CdeError::Dimension {
                expected: self.num_features(),
                got: coefficients.len(),
            });
        }
        self.coefficients = coefficients;
        Ok(self)
    }

    pub fn num_features(&self) -> usize {
        feature_count(self.degree, self.p, self.covariate_order, self.interactions)
    }

    /// Writes the feature vector of `(z, x)` into `out`.
    pub fn features_into(&self, z: f64, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_features());
        // covariate block shared by every power
        let mut cov = Vec::with_capacity(terms_per_power(self.p, self.covariate_order, self.interactions));
        cov.push(1.0);
        for &v in x.iter() {
            let mut pow = 1.0;
            for _ in 0..self.covariate_order {
                pow *= v;
                cov.push(pow);
            }
        }
        if self.interactions {
            for j in 0..self.p {
                for k in (j + 1)..self.p {
                    cov.push(x[j] * x[k]);
                }
            }
        }
        let c = z - 0.5;
        let mut zb = 1.0;
        for chunk in out.chunks_mut(cov.len()) {
            zb *= c;
            for (o, t) in chunk.iter_mut().zip(&cov) {
                *o = zb * t;
            }
        }
    }

    pub fn features(&self, z: f64, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut out = vec![0.0; self.num_features()];
        self.features_into(z, x, &mut out);
        Ok(out)
    }

    fn check_x(&self, x: ArrayView1<'_, f64>) -> Result<()> {
        if x.len() != self.p {
            return Err(CdeError::Dimension {
                expected: self.p,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `q(z, x)`: the feature vector dotted with the coefficients.
    pub fn q(&self, z: f64, x: ArrayView1<'_, f64>) -> Result<f64> {
        if self.coefficients.len() != self.num_features() {
            return Err(CdeError::Dimension {
                expected: self.num_features(),
                got: self.coefficients.len(),
            });
        }
        let f = self.features(z, x)?;
        Ok(dot(&f, &self.coefficients))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn centered_point_has_zero_features() {
        let s = PolynomialSpec::new(3, 2, 2, true).unwrap();
        let f = s.features(0.5, array![1.3, -2.0].view()).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_enumerated_features() {
        let s = PolynomialSpec::new(1, 1, 1, false).unwrap();
        assert_eq!(s.features(0.75, array![2.0].view()).unwrap(), vec![0.25, 0.5]);

        // b=1,2 with p=2, O=2, interactions: [c, c x1, c x1^2, c x2, c x2^2, c x1 x2, ...]
        let s = PolynomialSpec::new(2, 2, 2, true).unwrap();
        let f = s.features(0.7, array![2.0, 3.0].view()).unwrap();
        let c = 0.7 - 0.5;
        let expect = [1.0, 2.0, 4.0, 3.0, 9.0, 6.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((f[k] - c * e).abs() < 1e-15);
            assert!((f[6 + k] - c * c * e).abs() < 1e-15);
        }
    }

    #[test]
    fn term_count() {
        assert_eq!(feature_count(3, 2, 2, true), 18);
        assert_eq!(PolynomialSpec::new(3, 2, 2, true).unwrap().coefficients.len(), 18);
        assert_eq!(feature_count(3, 1, 2, true), 9);
        assert_eq!(feature_count(2, 5, 1, false), 12);
    }

    #[test]
    fn q_values() {
        let s = PolynomialSpec::new(1, 1, 1, false).unwrap();
        assert_eq!(s.q(0.9, array![3.0].view()).unwrap(), 0.0);
        let s = s.with_coefficients(vec![1.0, 1.0]).unwrap();
        assert_eq!(s.q(0.75, array![2.0].view()).unwrap(), 0.75);
        assert_eq!(s.q(0.5, array![2.0].view()).unwrap(), 0.0);
        assert!(s.clone().with_coefficients(vec![1.0]).is_err());
        let mut bad = s;
        bad.coefficients.pop();
        assert!(bad.q(0.3, array![1.0].view()).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(PolynomialSpec::new(0, 1, 1, false).is_err());
        assert!(PolynomialSpec::new(2, 1, 3, false).is_err());
    }
}

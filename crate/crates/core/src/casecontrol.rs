//! Case-control approximation of the normalized likelihood.
//!
//! Each observation's normalizing integral `int_0^1 exp(q(u, x)) du` is
//! replaced by the sum of `exp(q)` over the observed case and its `M`
//! uniform controls, so the per-observation term is a softmax over `M + 1`
//! values. `M = 1` is the matched case-control form; large `M` approaches
//! the Poisson-process likelihood.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, CdeError, Result};
use crate::qmodel::{Batch, Forward, Mode, QModel};

/// Control draws, one row of `M` values per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    pub values: Array2<f64>,
    pub seed: u64,
}

impl ControlSet {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Controls per observation.
    pub fn m(&self) -> usize {
        self.values.ncols()
    }
}

/// i.i.d. Uniform(0, 1) controls, strictly inside the interval.
pub fn sample_controls(n: usize, m: usize, seed: u64) -> Result<ControlSet> {
    if n == 0 || m == 0 {
        return Err(invalid("control sampling needs n >= 1 and M >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = Array2::from_shape_simple_fn((n, m), || loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    });
    Ok(ControlSet { values, seed })
}

/// Midpoint grid `(k - 0.5) / M`, identical for every observation.
pub fn grid_controls(n: usize, m: usize) -> Result<ControlSet> {
    if n == 0 || m == 0 {
        return Err(invalid("control grid needs n >= 1 and M >= 1"));
    }
    let values = Array2::from_shape_fn((n, m), |(_, k)| (k as f64 + 0.5) / m as f64);
    Ok(ControlSet { values, seed: 0 })
}

/// Case-plus-controls rows for the observations in `obs`, grouped per
/// observation with the case first. Owners index into `obs`.
pub(crate) fn stack_rows(z_cases: &[f64], controls: &ControlSet, obs: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let m = controls.m();
    let mut z = Vec::with_capacity(obs.len() * (m + 1));
    let mut owner = Vec::with_capacity(obs.len() * (m + 1));
    for (local, &i) in obs.iter().enumerate() {
        z.push(z_cases[i]);
        z.extend(controls.values.row(i).iter());
        owner.extend(std::iter::repeat_n(local, m + 1));
    }
    (z, owner)
}

/// Softmax weights of one case-plus-controls group; returns
/// `(logsumexp - q_case, weights)`.
pub fn group_term(q: &[f64]) -> (f64, Vec<f64>) {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = q.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (max + total.ln() - q[0], w)
}

/// Value and gradient of the penalized objective on a subset of observations.
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub forward: Forward,
}

/// The penalized negative log-likelihood over fixed cases and controls.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub z_cases: &'a [f64],
    pub x: ArrayView2<'a, f64>,
    pub controls: &'a ControlSet,
    pub omega: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        z_cases: &'a [f64],
        x: ArrayView2<'a, f64>,
        controls: &'a ControlSet,
        omega: f64,
    ) -> Result<Self> {
        let n = z_cases.len();
        if x.nrows() != n {
            return Err(CdeError::Dimension {
                expected: n,
                got: x.nrows(),
            });
        }
        if controls.n() != n {
            return Err(CdeError::Dimension {
                expected: n,
                got: controls.n(),
            });
        }
        if !(omega >= 0.0) {
            return Err(invalid("ridge weight must be non-negative"));
        }
        Ok(Self {
            z_cases,
            x,
            controls,
            omega,
        })
    }

    pub fn n(&self) -> usize {
        self.z_cases.len()
    }

    fn forward(&self, model: &QModel, obs: &[usize], mode: Mode) -> Result<(Vec<f64>, Forward)> {
        let (z, owner) = stack_rows(self.z_cases, self.controls, obs);
        let x = self.x.select(Axis(0), obs);
        model.forward(
            &Batch {
                z: &z,
                owner: &owner,
                x: x.view(),
            },
            mode,
        )
    }

    fn all(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }

    /// Objective over all observations.
    pub fn value(&self, model: &QModel, mode: Mode) -> Result<f64> {
        let (q, _) = self.forward(model, &self.all(), mode)?;
        let data: f64 = q.chunks(self.controls.m() + 1).map(|g| group_term(g).0).sum();
        Ok(data + self.omega * model.penalty_norm_sq())
    }

    /// Data term over `obs` plus `penalty_scale * omega * ||theta||^2`, with gradient.
    pub fn evaluate(
        &self,
        model: &QModel,
        obs: &[usize],
        penalty_scale: f64,
        mode: Mode,
    ) -> Result<Evaluation> {
        let (q, forward) = self.forward(model, obs, mode)?;
        let mut value = 0.0;
        let mut dq = Vec::with_capacity(q.len());
        for g in q.chunks(self.controls.m() + 1) {
            let (term, w) = group_term(g);
            value += term;
            dq.push(w[0] - 1.0);
            dq.extend_from_slice(&w[1..]);
        }
        let mut gradient = model.backward(&forward, &dq)?;
        let lambda = self.omega * penalty_scale;
        let theta = model.params();
        for ((g, t), m) in gradient.iter_mut().zip(&theta).zip(model.penalty_mask()) {
            if m {
                value += lambda * t * t;
                *g += 2.0 * lambda * t;
            }
        }
        Ok(Evaluation {
            value,
            gradient,
            forward,
        })
    }

    /// Full-data value and gradient.
    pub fn value_and_gradient(&self, model: &QModel, mode: Mode) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(model, &self.all(), 1.0, mode)?;
        Ok((e.value, e.gradient))
    }
}

/// Penalized case-control negative log-likelihood.
pub fn nll(
    model: &QModel,
    z_cases: &[f64],
    x: ArrayView2<'_, f64>,
    controls: &ControlSet,
    omega: f64,
    mode: Mode,
) -> Result<f64> {
    Objective::new(z_cases, x, controls, omega)?.value(model, mode)
}

/// Gradient of [`nll`] with respect to the flat parameter vector.
pub fn nll_gradient(
    model: &QModel,
    z_cases: &[f64],
    x: ArrayView2<'_, f64>,
    controls: &ControlSet,
    omega: f64,
    mode: Mode,
) -> Result<Vec<f64>> {
    Ok(Objective::new(z_cases, x, controls, omega)?
        .value_and_gradient(model, mode)?
        .1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmodel::PolynomialSpec;
    use ndarray::{array, Array2};

    fn poly(coef: Vec<f64>) -> QModel {
        QModel::Polynomial(
            PolynomialSpec::new(2, 1, 1, false)
                .unwrap()
                .with_coefficients(coef)
                .unwrap(),
        )
    }

    #[test]
    fn controls_support_and_determinism() {
        let c = sample_controls(100, 10, 3).unwrap();
        assert_eq!(c.values.len(), 1000);
        assert!(c.values.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(c, sample_controls(100, 10, 3).unwrap());
        assert_ne!(c, sample_controls(100, 10, 4).unwrap());
        assert!(sample_controls(0, 1, 0).is_err());
    }

    #[test]
    fn controls_have_uniform_mean() {
        let c = sample_controls(100_000, 1, 17).unwrap();
        let mean = c.values.sum() / 1e5;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn grid_controls_are_midpoints() {
        let c = grid_controls(2, 4).unwrap();
        assert_eq!(c.values.row(1).to_vec(), vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn zero_model_is_log_m_plus_one() {
        let n = 7;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let z: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let c = sample_controls(n, 4, 1).unwrap();
        let v = nll(&poly(vec![0.0; 4]), &z, x.view(), &c, 0.0, Mode::Eval).unwrap();
        assert!((v - n as f64 * 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_control_closed_form() {
        // q = coef0 * (z - 0.5): q(case) - q(control) = coef0 * (z - z*)
        let m = QModel::Polynomial(
            PolynomialSpec::new(1, 1, 1, false)
                .unwrap()
                .with_coefficients(vec![2.0, 0.0])
                .unwrap(),
        );
        let x = array![[0.3], [1.1], [-0.2]];
        let z = [0.9, 0.8, 0.7];
        let c = ControlSet {
            values: array![[0.4], [0.3], [0.2]],
            seed: 0,
        };
        // difference c = 2 * 0.5 = 1 for every observation
        let v = nll(&m, &z, x.view(), &c, 0.0, Mode::Eval).unwrap();
        let expected = 3.0 * (1.0 + (-1.0f64).exp()).ln();
        assert!((v - expected).abs() < 1e-13);
        let with_penalty = nll(&m, &z, x.view(), &c, 0.5, Mode::Eval).unwrap();
        assert!((with_penalty - (expected + 0.5 * 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gradient_of_zero_data_is_ridge_only() {
        // all cases sit at their controls, so the data gradient vanishes
        let m = poly(vec![0.3, -0.2, 0.1, 0.4]);
        let x = array![[0.5], [1.0]];
        let z = [0.3, 0.6];
        let c = ControlSet {
            values: array![[0.3], [0.6]],
            seed: 0,
        };
        let g = nll_gradient(&m, &z, x.view(), &c, 0.7, Mode::Eval).unwrap();
        for (gi, t) in g.iter().zip(m.params()) {
            assert!((gi - 1.4 * t).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_upstream_sums_to_zero() {
        let (_, w) = group_term(&[0.3, -2.0, 5.0, 1.0]);
        let upstream: f64 = (w[0] - 1.0) + w[1..].iter().sum::<f64>();
        assert!(upstream.abs() < 1e-15);
        // overflow safety
        let (t, w) = group_term(&[800.0, 799.0]);
        assert!(t.is_finite() && w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_and_penalty_errors() {
        let x = array![[0.5], [1.0]];
        let c = sample_controls(2, 1, 0).unwrap();
        assert!(nll(&poly(vec![0.0; 4]), &[0.2], x.view(), &c, 0.0, Mode::Eval).is_err());
        assert!(nll(&poly(vec![0.0; 4]), &[0.2, 0.4], x.view(), &c, -1.0, Mode::Eval).is_err());
    }
}

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::FitReport;
use crate::casecontrol::ControlSet;
use crate::error::{invalid, CdeError, Result};
use crate::qmodel::PolynomialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    pub max_iter: usize,
    /// Stop when the gradient's max-norm falls below this.
    pub tol: f64,
    /// Also stop when half the Newton decrement falls below this times
    /// `max(1, |objective|)`, which is the attainable precision when the
    /// gradient stalls at rounding level.
    pub decrement_tol: f64,
    pub max_halvings: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
            decrement_tol: 1e-12,
            max_halvings: 60,
        }
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `sum_i log(1 + exp(-d_i . theta)) + omega ||theta||^2`.
fn objective(d: &DMatrix<f64>, theta: &DVector<f64>, omega: f64) -> f64 {
    let eta = d * theta;
    eta.iter().map(|&e| softplus(-e)).sum::<f64>() + omega * theta.norm_squared()
}

/// Fits the polynomial model with one control per observation.
///
/// With a single control the case-control likelihood is a logistic
/// regression with every label equal to one on the difference rows
/// `features(z_i) - features(z*_i)`. The ridge-penalized problem is strictly
/// convex for `omega > 0` and is solved by Newton's method with step halving.
/// There is no intercept, so no dummy rows are needed.
pub fn fit_poly_mcc(
    spec: &PolynomialSpec,
    z_cases: &[f64],
    x: ArrayView2<'_, f64>,
    controls: &ControlSet,
    omega: f64,
    opts: IrlsOptions,
) -> Result<(PolynomialSpec, FitReport)> {
    let start = Instant::now();
    let n = z_cases.len();
    if controls.m() != 1 {
        return Err(invalid(format!(
            "the Newton path needs exactly one control per observation, got {}",
            controls.m()
        )));
    }
    if x.nrows() != n || controls.n() != n {
        return Err(CdeError::Dimension {
            expected: n,
            got: x.nrows().min(controls.n()),
        });
    }
    if x.ncols() != spec.p {
        return Err(CdeError::Dimension {
            expected: spec.p,
            got: x.ncols(),
        });
    }
    if !(omega >= 0.0) {
        return Err(invalid("ridge weight must be non-negative"));
    }
    let k = spec.num_features();
    let mut d = DMatrix::zeros(n, k);
    let mut fc = vec![0.0; k];
    let mut fz = vec![0.0; k];
    for i in 0..n {
        spec.features_into(z_cases[i], x.row(i), &mut fc);
        spec.features_into(controls.values[[i, 0]], x.row(i), &mut fz);
        for j in 0..k {
            d[(i, j)] = fc[j] - fz[j];
        }
    }

    let mut theta = DVector::zeros(k);
    let mut value = objective(&d, &theta, omega);
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let eta = &d * &theta;
        // residual weight sigma(-eta) and curvature sigma(eta) sigma(-eta)
        let r = eta.map(|e| sigmoid(-e));
        let w = eta.map(|e| sigmoid(e) * sigmoid(-e));
        let grad = -(d.transpose() * &r) + &theta * (2.0 * omega);
        if grad.amax() < opts.tol {
            converged = true;
            break;
        }
        let mut hess = d.transpose() * DMatrix::from_diagonal(&w) * &d;
        for j in 0..k {
            hess[(j, j)] += 2.0 * omega;
        }
        let step = solve_spd(hess, &grad).ok_or(CdeError::RankDeficient)?;
        if 0.5 * grad.dot(&step) < opts.decrement_tol * value.abs().max(1.0) {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_halvings {
            let candidate = &theta - &step * t;
            let v = objective(&d, &candidate, omega);
            if v <= value {
                theta = candidate;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        trace.push(value);
        if !accepted {
            // no descent left at machine precision
            converged = grad.amax() < opts.tol.sqrt();
            break;
        }
    }
    let fitted = spec.clone().with_coefficients(theta.iter().copied().collect())?;
    let report = FitReport {
        final_objective: value,
        trace,
        seconds: start.elapsed().as_secs_f64(),
        iterations,
        converged,
        config: serde_json::json!({
            "method": "newton",
            "omega": omega,
            "max_iter": opts.max_iter,
            "tol": opts.tol,
            "decrement_tol": opts.decrement_tol,
        }),
    };
    Ok((fitted, report))
}

/// Solves `h x = b` for symmetric positive (semi)definite `h`, adding
/// growing diagonal jitter when the factorization fails.
fn solve_spd(h: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut hj = h.clone();
        for j in 0..hj.nrows() {
            hj[(j, j)] += jitter;
        }
        if let Some(ch) = hj.cholesky() {
            return Some(ch.solve(b));
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    None
}

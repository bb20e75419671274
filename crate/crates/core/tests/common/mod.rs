#![allow(dead_code)]

use logistic_cde::qmodel::{MlpSpec, QModel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sum_g ln(sum_k e^{q_gk}) - q_g0` evaluated term by term.
pub fn reference_nll(groups: &[Vec<f64>]) -> f64 {
    groups
        .iter()
        .map(|g| g.iter().map(|v| v.exp()).sum::<f64>().ln() - g[0])
        .sum()
}

/// Central finite differences of `f` at `theta`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            t[j] = theta[j] + h;
            let up = f(&t);
            t[j] = theta[j] - h;
            let down = f(&t);
            t[j] = theta[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| <= max(rel * max(|a|, |b|), abs)`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(abs)
}

/// Plain gradient descent with Armijo backtracking.
pub fn gradient_descent(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let mut theta = start;
    let mut value = f(&theta);
    let mut step = 1.0;
    for _ in 0..max_iter {
        let g = grad(&theta);
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg.sqrt() < tol {
            break;
        }
        loop {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
            let v = f(&cand);
            if v <= value - 0.5 * step * gg {
                theta = cand;
                value = v;
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return theta;
            }
        }
    }
    theta
}

/// He-initialized network with random biases and batch-norm affine
/// parameters, so normalized pre-activations take both signs.
pub fn random_mlp(r: usize, t: usize, p: usize, seed: u64) -> QModel {
    let mut spec = MlpSpec::init_he(r, t, p, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    spec.input_weights.row_mut(0).iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    spec.hidden_weights.row_mut(0).iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    for bn in [&mut spec.input_bn, &mut spec.hidden_bn] {
        bn.scale.iter_mut().for_each(|s| *s = rng.random_range(0.5..1.5));
        bn.shift.iter_mut().for_each(|s| *s = rng.random_range(-0.3..0.3));
    }
    QModel::Mlp(spec)
}

/// Random cases on the open unit interval and standard-normal-ish covariates.
pub fn random_problem(n: usize, p: usize, seed: u64) -> (Vec<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
    let x = Array2::from_shape_simple_fn((n, p), || rng.random_range(-2.0..2.0));
    (z, x)
}

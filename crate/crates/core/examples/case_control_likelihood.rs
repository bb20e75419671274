//! The case-control objective by hand: at q = 0 every group contributes
//! ln(M + 1), and the gradient agrees with a central difference.

use logistic_cde::casecontrol::{group_term, nll, nll_gradient, sample_controls};
use logistic_cde::qmodel::{Mode, PolynomialSpec, QModel};
use ndarray::Array2;

fn main() -> logistic_cde::Result<()> {
    let n = 40;
    let z: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (j + 2)) as f64).sin());

    for m in [1, 5, 25] {
        let controls = sample_controls(n, m, 3)?;
        let zero = QModel::Polynomial(PolynomialSpec::new(3, 2, 2, false)?);
        let v = nll(&zero, &z, x.view(), &controls, 0.0, Mode::Eval)?;
        println!("M = {m:>2}: nll at q = 0 is {v:.6}, n ln(M + 1) = {:.6}", n as f64 * ((m + 1) as f64).ln());
    }

    let (term, weights) = group_term(&[0.25, 0.5, 0.75]);
    println!("one group: term {term:.4}, weights {weights:.4?}");

    let controls = sample_controls(n, 5, 4)?;
    let spec = PolynomialSpec::new(3, 2, 2, false)?;
    let theta: Vec<f64> = (0..spec.num_features()).map(|k| 0.3 * ((k as f64) * 0.7).cos()).collect();
    let model = QModel::Polynomial(spec.with_coefficients(theta.clone())?);
    let grad = nll_gradient(&model, &z, x.view(), &controls, 0.1, Mode::Eval)?;

    let h = 1e-6;
    let mut worst = 0.0f64;
    for k in 0..theta.len() {
        let mut shifted = model.clone();
        let mut t = theta.clone();
        t[k] += h;
        shifted.set_params(&t)?;
        let up = nll(&shifted, &z, x.view(), &controls, 0.1, Mode::Eval)?;
        t[k] -= 2.0 * h;
        shifted.set_params(&t)?;
        let down = nll(&shifted, &z, x.view(), &controls, 0.1, Mode::Eval)?;
        worst = worst.max(((up - down) / (2.0 * h) - grad[k]).abs());
    }
    println!("largest gradient error against central differences: {worst:.2e}");
    Ok(())
}

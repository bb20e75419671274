//! The Gaussian base transform: map responses to the unit interval, back,
//! and turn a unit-scale density into one on the response scale.

use logistic_cde::dataset::Dataset;
use logistic_cde::predict::{density_on_y, predict_grid, GridMode};
use logistic_cde::qmodel::{PolynomialSpec, QModel};
use logistic_cde::transform::{fit_ols, TransformOptions};
use ndarray::{array, Array1, Array2};

fn main() -> logistic_cde::Result<()> {
    let x = Array2::from_shape_fn((50, 1), |(i, _)| i as f64 / 10.0);
    let y = Array1::from_shape_fn(50, |i| 1.0 + 2.0 * x[[i, 0]] + (i as f64 * 2.1).sin());
    let data = Dataset::from_arrays(x, y)?;
    let t = fit_ols(&data, TransformOptions::default())?;
    println!("sigma = {:.4}", t.sigma);

    let row = array![2.0];
    for v in [3.0, 5.0, 7.0] {
        let z = t.to_unit(v, row.view())?;
        println!("y = {v}: z = {z:.5}, back = {:.5}", t.from_unit(z, row.view())?);
    }

    // with q = 0 the predictive density is the transform's own normal density
    let zero = QModel::Polynomial(PolynomialSpec::new(1, 1, 1, false)?);
    let de = predict_grid(&zero, row.view(), 9, GridMode::Quantile, &t, None)?;
    let dens = density_on_y(&de, &t, row.view())?;
    for (yk, fk) in de.y_grid.iter().zip(&dens) {
        println!("y = {yk:>7.3}  f(y) = {fk:.4}");
    }
    Ok(())
}

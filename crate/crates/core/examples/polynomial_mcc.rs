//! Fit the cubic polynomial q-model with one control per observation on
//! the one-covariate bimodal scenario and print a few predictive quantiles.

use logistic_cde::experiment::{FitSettings, FittedModel, Method};
use logistic_cde::predict::GridMode;
use logistic_cde::simgen::{generate, ScenarioConfig};
use ndarray::array;

fn main() -> logistic_cde::Result<()> {
    let scenario = generate(&ScenarioConfig::new(3, 400, 7))?;
    let settings = FitSettings::new(Method::PolyMcc, 0.025);
    let model = FittedModel::fit(&scenario.train, &settings, 7)?;

    let report = model.report.as_ref().expect("polynomial fits carry a report");
    println!("newton iterations: {}, converged: {}", report.iterations, report.converged);
    println!("coefficients: {:.4?}", model.model.params());

    println!("{:>5} {:>8} {:>8} {:>8}", "x", "q10", "median", "q90");
    for x in [1.0, 3.0, 5.0, 7.0, 9.0] {
        let de = model.density(array![x].view(), 200, GridMode::Cutpoint)?;
        let quantile = |p: f64| de.y_grid[de.cdf.iter().position(|&c| c >= p).unwrap_or(de.len() - 1)];
        println!("{x:>5.1} {:>8.3} {:>8.3} {:>8.3}", quantile(0.1), quantile(0.5), quantile(0.9));
    }

    let div = model.divergence(&scenario.test, &scenario.test_truth, 100)?;
    println!("mean CRPS divergence from the truth: {:.5} (se {:.5})", div.mean, div.standard_error);
    Ok(())
}

//! Train the two-layer network with ten controls per observation and show
//! the objective trace of the ADAM run.

use logistic_cde::experiment::{default_omega, FitSettings, FittedModel, Method};
use logistic_cde::simgen::{generate, ScenarioConfig};

fn main() -> logistic_cde::Result<()> {
    let scenario = generate(&ScenarioConfig::new(1, 400, 11))?;
    // 30 + 30 units, 600 ADAM steps of 50 rows, 10 controls per observation
    let settings = FitSettings::new(Method::MlpIpp, default_omega(Method::MlpIpp, 1, 400));

    let model = FittedModel::fit(&scenario.train, &settings, 11)?;
    let report = model.report.as_ref().expect("network fits carry a report");
    for (k, v) in report.trace.iter().enumerate().step_by(60) {
        println!("trace[{k:>3}] {v:.5}");
    }
    println!("parameters: {}, seconds: {:.2}", model.model.num_params(), report.seconds);

    let ipp = model.divergence(&scenario.test, &scenario.test_truth, 100)?;
    let ols = FittedModel::fit(&scenario.train, &FitSettings::new(Method::OlsGaussian, 0.0), 11)?
        .divergence(&scenario.test, &scenario.test_truth, 100)?;
    println!("CRPS divergence: network {:.5}, Gaussian baseline {:.5}", ipp.mean, ols.mean);
    Ok(())
}

//! The four synthetic scenarios: sizes, response ranges and the true
//! conditional CDF at one test row.

use logistic_cde::eval::true_cdf;
use logistic_cde::simgen::{generate, ScenarioConfig};

fn main() -> logistic_cde::Result<()> {
    for model in 1..=4 {
        let s = generate(&ScenarioConfig::new(model, 200, 42))?;
        let (lo, hi) = s.train.response_range();
        println!(
            "model {model}: p = {}, train {} / test {}, response range [{lo:.2}, {hi:.2}]",
            s.train.p(),
            s.train.n(),
            s.test.n()
        );
        let y = s.test.response[0];
        let quartiles: Vec<f64> = [y - 1.0, y, y + 1.0]
            .iter()
            .map(|&v| true_cdf(&s.test_truth, 0, v))
            .collect::<logistic_cde::Result<_>>()?;
        println!("  true CDF around the first test response {y:.3}: {quartiles:.3?}");
    }
    Ok(())
}

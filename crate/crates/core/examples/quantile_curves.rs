//! Predictive distributions along a sweep of one covariate, written in long
//! format for plotting.

use logistic_cde::experiment::{covariate_sweep, emit_quantile_curves, FitSettings, FittedModel, Method};
use logistic_cde::simgen::{generate, ScenarioConfig};

fn main() -> logistic_cde::Result<()> {
    let scenario = generate(&ScenarioConfig::new(3, 400, 1))?;
    let model = FittedModel::fit(&scenario.train, &FitSettings::new(Method::PolyMcc, 0.025), 1)?;

    let sweep = covariate_sweep(&model, 0, 0.0, 10.0, 11)?;
    let table = emit_quantile_curves(&model, &sweep, &model.feature_names, 50)?;

    let path = std::env::temp_dir().join("lcde_curves.csv");
    table.write_csv(&path)?;
    println!("{} rows written to {}", table.rows.len(), path.display());

    // mode of each predictive distribution
    let prob = table.numeric_column("probability")?;
    let y = table.numeric_column("y")?;
    for (i, block) in prob.chunks(50).enumerate() {
        let k = (0..50).max_by(|&a, &b| block[a].total_cmp(&block[b])).unwrap();
        println!("x = {:>4.1}: mode near y = {:.3}", sweep[[i, 0]], y[i * 50 + k]);
    }
    Ok(())
}

//! A reduced simulation study: two scenarios, three replicates, the
//! polynomial and Gaussian methods. Prints the quartile summary.

use logistic_cde::experiment::{run_simulation_study, ExperimentConfig, Method};

fn main() -> logistic_cde::Result<()> {
    let config = ExperimentConfig {
        scenarios: vec![1, 3],
        sizes: vec![200],
        replicates: 3,
        methods: vec![Method::PolyMcc, Method::OlsGaussian],
        seed: 2024,
        ..Default::default()
    };
    let tables = run_simulation_study(&config)?;
    println!("{}", tables.summary.columns.join("\t"));
    for row in &tables.summary.rows {
        println!("{}", row.join("\t"));
    }

    let dir = std::env::temp_dir().join("lcde_simulation_study");
    tables.write(&dir)?;
    println!("tables written to {}", dir.display());
    Ok(())
}

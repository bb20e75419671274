//! Grouped k-fold cross-validation on a delimited file: rows sharing a
//! group label always land in the same fold.

use std::fmt::Write as _;

use logistic_cde::dataset::{load_table, LoadOptions};
use logistic_cde::experiment::{run_cv, FitSettings, Method, APPLICATION_OMEGA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> logistic_cde::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("site;temp;wind;load\n");
    for site in 0..12 {
        let offset = rng.random_range(-1.0..1.0);
        for _ in 0..25 {
            let temp: f64 = rng.random_range(0.0..30.0);
            let wind: f64 = rng.random_range(0.0..10.0);
            let noise = (rng.random::<f64>() - 0.5) * (1.0 + 0.2 * wind);
            let load = 0.1 * (temp - 18.0).powi(2) + offset + noise;
            writeln!(text, "s{site};{temp:.3};{wind:.3};{load:.4}").unwrap();
        }
    }
    let path = std::env::temp_dir().join("lcde_grouped_cv.csv");
    std::fs::write(&path, text).expect("temp file");

    let mut opts = LoadOptions::new("load").group("site");
    opts.delimiter = b';';
    let data = load_table(&path, &opts)?.data;

    let settings = [
        FitSettings::new(Method::PolyMcc, APPLICATION_OMEGA),
        FitSettings::new(Method::OlsGaussian, 0.0),
    ];
    let outcome = run_cv(&data, 4, &settings, 9, 100)?;
    for (method, report) in &outcome.reports {
        println!("{:<16} CRPS {:.5} ± {:.5}", method.label(), report.mean, report.standard_error);
    }
    for f in outcome.folds.iter().filter(|f| f.method == Method::PolyMcc) {
        println!("fold {}: {} train rows, {} test rows", f.fold, f.train_rows.len(), f.test_rows.len());
    }
    Ok(())
}

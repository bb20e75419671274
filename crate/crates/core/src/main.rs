use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use logistic_cde::dataset::{load_table, LoadOptions, Table};
use logistic_cde::experiment::{
    covariate_sweep, emit_quantile_curves, run_cv, run_simulation_study, ExperimentConfig, FittedModel, Method,
    APPLICATION_OMEGA,
};
use logistic_cde::predict::GridMode;
use logistic_cde::simgen::{generate, ScenarioConfig};
use logistic_cde::{CdeError, Result};

#[derive(Parser)]
#[command(name = "lcde", version, about = "Conditional density estimation by logistic transformation")]
struct Cli {
    /// Experiment configuration (JSON, or TOML by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Delimited input file with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: String,
    /// Group column; folds never split a group.
    #[arg(long)]
    group: Option<String>,
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Keep only rows where COLUMN equals VALUE.
    #[arg(long, value_name = "COLUMN=VALUE")]
    filter: Option<String>,
    /// Columns to ignore.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Quantile,
    Cutpoint,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation study, or write simulated datasets with --dataset-only.
    Simulate {
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<u8>,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long)]
        dataset_only: bool,
    },
    /// Fit one method to a data file and save the model as JSON.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "poly-mcc")]
        method: Method,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        controls: Option<usize>,
    },
    /// Predict discrete conditional distributions for each row of a file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Comma-delimited file containing the model's feature columns.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        grid_points: usize,
        #[arg(long, value_enum, default_value = "cutpoint")]
        mode: Grid,
    },
    /// Score a fitted model by CRPS on labelled data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 100)]
        grid_points: usize,
    },
    /// k-fold cross-validated CRPS per method.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, value_delimiter = ',', default_value = "poly-mcc,mlp-ipp,ols-gaussian")]
        methods: Vec<Method>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, default_value_t = 100)]
        grid_points: usize,
    },
    /// Quantile curves over a sweep of one covariate.
    Curves {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 100)]
        levels: usize,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CdeError + '_ {
    move |source| CdeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(io_err(path))
}

impl DataArgs {
    fn load(&self) -> Result<logistic_cde::dataset::Dataset> {
        if !self.delimiter.is_ascii() {
            return Err(CdeError::InvalidArgument("delimiter must be a single ASCII character".into()));
        }
        let filter = match &self.filter {
            Some(f) => {
                let (c, v) = f
                    .split_once('=')
                    .ok_or_else(|| CdeError::InvalidArgument("--filter expects COLUMN=VALUE".into()))?;
                Some((c.to_string(), v.to_string()))
            }
            None => None,
        };
        let opts = LoadOptions {
            response: self.response.clone(),
            group: self.group.clone(),
            delimiter: self.delimiter as u8,
            filter,
            exclude: self.exclude.clone(),
        };
        let loaded = load_table(&self.data, &opts)?;
        if loaded.rows_dropped > 0 {
            eprintln!("dropped {} of {} rows with a missing response", loaded.rows_dropped, loaded.rows_read);
        }
        Ok(loaded.data)
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    let out = config.out_dir.clone().filter(|_| cli.out_dir == Path::new("out")).unwrap_or(cli.out_dir);
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;

    match cli.command {
        Command::Simulate {
            scenarios,
            sizes,
            replicates,
            methods,
            dataset_only,
        } => {
            if !scenarios.is_empty() {
                config.scenarios = scenarios;
            }
            if !sizes.is_empty() {
                config.sizes = sizes;
            }
            if let Some(r) = replicates {
                config.replicates = r;
            }
            if !methods.is_empty() {
                config.methods = methods;
            }
            config.validate()?;
            if dataset_only {
                for &s in &config.scenarios {
                    for &n in &config.sizes {
                        for r in 0..config.replicates {
                            let seed = logistic_cde::experiment::derive_seed(config.seed, &[s as u64, n as u64, r as u64]);
                            let sc = generate(&ScenarioConfig {
                                train_fraction: config.train_fraction,
                                ..ScenarioConfig::new(s, n, seed)
                            })?;
                            let stem = format!("model{s}_n{n}_rep{r}");
                            sc.train.write_csv(&out.join(format!("{stem}_train.csv")))?;
                            sc.test.write_csv(&out.join(format!("{stem}_test.csv")))?;
                            write_json(&out.join(format!("{stem}_truth.json")), &sc.test_truth)?;
                        }
                    }
                }
                println!("wrote datasets to {}", out.display());
                return Ok(());
            }
            let tables = run_simulation_study(&config)?;
            tables.write(&out)?;
            write_json(&out.join("config.json"), &config)?;
            for row in &tables.summary.rows {
                println!("{}", row.join("\t"));
            }
        }
        Command::Fit {
            data,
            method,
            omega,
            controls,
        } => {
            let d = data.load()?;
            let mut settings = config.settings_for(method, 0, d.n());
            settings.omega = omega.or(config.omega).unwrap_or(APPLICATION_OMEGA);
            if let Some(m) = controls {
                settings.controls = m;
            }
            let model = config.in_pool(|| FittedModel::fit(&d, &settings, config.seed))??;
            let path = out.join("model.json");
            model.save(&path)?;
            println!(
                "fitted {} on {} rows; converged: {}; saved {}",
                method.label(),
                d.n(),
                model.converged(),
                path.display()
            );
        }
        Command::Predict {
            model,
            data,
            grid_points,
            mode,
        } => {
            let m = FittedModel::load(&model)?;
            let x = feature_matrix(&Table::read_csv(&data)?, &m.feature_names)?;
            let mode = match mode {
                Grid::Quantile => GridMode::Quantile,
                Grid::Cutpoint => GridMode::Cutpoint,
            };
            let mut t = Table::new(["row", "z", "y", "probability", "cdf"]);
            for (i, row) in x.rows().into_iter().enumerate() {
                let de = m.density(row, grid_points, mode)?;
                for k in 0..de.len() {
                    t.push(vec![
                        i.to_string(),
                        de.z_grid[k].to_string(),
                        de.y_grid[k].to_string(),
                        de.probabilities[k].to_string(),
                        de.cdf[k].to_string(),
                    ]);
                }
            }
            t.write_csv(&out.join("predictions.csv"))?;
            println!("wrote {} rows to {}", t.rows.len(), out.join("predictions.csv").display());
        }
        Command::Evaluate {
            model,
            data,
            grid_points,
        } => {
            let m = FittedModel::load(&model)?;
            let d = data.load()?;
            let report = m.crps(&d, grid_points)?;
            let mut t = Table::new(["row", "crps"]);
            for (i, s) in report.scores.iter().enumerate() {
                t.push(vec![i.to_string(), s.to_string()]);
            }
            t.write_csv(&out.join("crps.csv"))?;
            write_json(&out.join("crps_report.json"), &report)?;
            println!("mean CRPS {} (se {}) over {} rows", report.mean, report.standard_error, d.n());
        }
        Command::Cv {
            data,
            folds,
            methods,
            omega,
            grid_points,
        } => {
            let d = data.load()?;
            let settings: Vec<_> = methods
                .iter()
                .map(|&mth| {
                    let mut s = config.settings_for(mth, 0, d.n());
                    if mth != Method::OlsGaussian {
                        s.omega = omega.or(config.omega).unwrap_or(APPLICATION_OMEGA);
                    }
                    s
                })
                .collect();
            let outcome = config.in_pool(|| run_cv(&d, folds, &settings, config.seed, grid_points))??;
            outcome.table().write_csv(&out.join("cv_summary.csv"))?;
            outcome.fold_table().write_csv(&out.join("cv_folds.csv"))?;
            let reports: Vec<_> = outcome.reports.iter().map(|(m, r)| (m.key(), r)).collect();
            write_json(&out.join("cv_report.json"), &reports)?;
            for (m, r) in &outcome.reports {
                println!("{:<20} {:.5} ± {:.5}", m.label(), r.mean, r.standard_error);
            }
        }
        Command::Curves {
            model,
            column,
            from,
            to,
            points,
            levels,
        } => {
            let m = FittedModel::load(&model)?;
            let j = m
                .feature_names
                .iter()
                .position(|c| *c == column)
                .ok_or(CdeError::UnknownColumn(column))?;
            let grid = covariate_sweep(&m, j, from, to, points)?;
            let t = emit_quantile_curves(&m, &grid, &m.feature_names, levels)?;
            t.write_csv(&out.join("curves.csv"))?;
            println!("wrote {} rows to {}", t.rows.len(), out.join("curves.csv").display());
        }
    }
    Ok(())
}

fn feature_matrix(t: &Table, names: &[String]) -> Result<Array2<f64>> {
    let cols = names.iter().map(|c| t.numeric_column(c)).collect::<Result<Vec<_>>>()?;
    Ok(Array2::from_shape_fn((t.rows.len(), names.len()), |(i, j)| cols[j][i]))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

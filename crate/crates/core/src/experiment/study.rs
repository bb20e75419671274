use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_omega, derive_seed, quartiles, select_omega, FitSettings, FittedModel, Method, PolyShape};
use crate::dataset::Table;
use crate::error::{invalid, CdeError, Result};
use crate::fit::SgdConfig;
use crate::simgen::{generate, ScenarioConfig};
use crate::transform::TransformKind;

/// Simulation-study and fitting configuration, read from JSON or TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenarios: Vec<u8>,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    /// Controls per observation for `mlp-ipp`.
    pub ipp_controls: usize,
    /// Overrides the tuned ridge weights for every method.
    pub omega: Option<f64>,
    /// When non-empty, each cell picks its ridge weight from this grid.
    pub omega_grid: Vec<f64>,
    pub poly: PolyShape,
    pub hidden_width: usize,
    pub output_width: usize,
    pub sgd: SgdConfig,
    pub transform: TransformKind,
    /// Cut points per predictive distribution.
    pub grid_points: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![1, 2, 3, 4],
            sizes: vec![200],
            replicates: 10,
            methods: vec![Method::PolyMcc, Method::MlpMcc, Method::MlpIpp, Method::OlsGaussian],
            ipp_controls: 10,
            omega: None,
            omega_grid: Vec::new(),
            poly: PolyShape::default(),
            hidden_width: 30,
            output_width: 30,
            sgd: SgdConfig::default(),
            transform: TransformKind::Auto,
            grid_points: 100,
            train_fraction: 0.75,
            seed: 0,
            out_dir: None,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a `.toml` file, or JSON for any other extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CdeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| CdeError::Toml(e.to_string()))
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.sizes.is_empty() || self.methods.is_empty() {
            return Err(invalid("scenarios, sizes and methods must be non-empty"));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be positive"));
        }
        if let Some(&m) = self.scenarios.iter().find(|m| !(1..=4).contains(*m)) {
            return Err(CdeError::UnknownModel(m));
        }
        if self.grid_points < 2 {
            return Err(invalid("grid_points must be at least 2"));
        }
        if self.ipp_controls == 0 {
            return Err(invalid("ipp_controls must be positive"));
        }
        Ok(())
    }

    /// Fit settings for one method on one scenario and size.
    pub fn settings_for(&self, method: Method, scenario: u8, n: usize) -> FitSettings {
        let mut s = FitSettings::new(method, self.omega.unwrap_or_else(|| default_omega(method, scenario, n)));
        if method == Method::MlpIpp {
            s.controls = self.ipp_controls;
        }
        s.poly = self.poly;
        s.hidden_width = self.hidden_width;
        s.output_width = self.output_width;
        s.sgd = self.sgd;
        s.transform = self.transform;
        s
    }

    /// Runs `f` on a pool with `threads` workers, or the global pool.
    pub fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| invalid(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }
}

/// Long-format scores plus per-cell summaries and timings.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTables {
    pub scores: Table,
    pub summary: Table,
    pub timing: Table,
}

impl StudyTables {
    /// Writes `scores.csv`, `summary.csv` and `timing.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| CdeError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        self.scores.write_csv(&dir.join("scores.csv"))?;
        self.summary.write_csv(&dir.join("summary.csv"))?;
        self.timing.write_csv(&dir.join("timing.csv"))
    }

    /// Divergences of one method in one cell, in replicate order.
    pub fn divergences(&self, scenario: u8, n: usize, method: Method) -> Vec<f64> {
        let (s, nn, m, d) = (0, 1, 3, 6);
        self.scores
            .rows
            .iter()
            .filter(|r| r[s] == scenario.to_string() && r[nn] == n.to_string() && r[m] == method.key())
            .map(|r| r[d].parse().unwrap_or(f64::NAN))
            .collect()
    }
}

struct CellResult {
    scenario: u8,
    n: usize,
    replicate: usize,
    method: Method,
    omega: f64,
    divergence: f64,
    seconds: f64,
    status: String,
}

fn run_cell(config: &ExperimentConfig, scenario: u8, n: usize, replicate: usize, method: Method) -> CellResult {
    let key = [scenario as u64, n as u64, replicate as u64];
    let data_seed = derive_seed(config.seed, &key);
    let fit_seed = derive_seed(config.seed, &[key[0], key[1], key[2], 100 + method.index()]);
    let settings = config.settings_for(method, scenario, n);
    let mut out = CellResult {
        scenario,
        n,
        replicate,
        method,
        omega: settings.omega,
        divergence: f64::NAN,
        seconds: f64::NAN,
        status: "ok".into(),
    };
    let result = (|| -> Result<()> {
        let sc = generate(&ScenarioConfig {
            train_fraction: config.train_fraction,
            ..ScenarioConfig::new(scenario, n, data_seed)
        })?;
        let start = Instant::now();
        let fitted = if config.omega_grid.is_empty() || method == Method::OlsGaussian {
            FittedModel::fit(&sc.train, &settings, fit_seed)?
        } else {
            select_omega(&sc.train, &settings, &config.omega_grid, config.grid_points, fit_seed)?.0
        };
        out.seconds = start.elapsed().as_secs_f64();
        out.omega = fitted.omega;
        if !fitted.converged() {
            out.status = "not_converged".into();
        }
        out.divergence = fitted.divergence(&sc.test, &sc.test_truth, config.grid_points)?.mean;
        Ok(())
    })();
    if let Err(e) = result {
        out.status = format!("error: {e}");
    }
    out
}

/// Runs every (scenario, size, replicate, method) cell in parallel.
///
/// Data for a replicate depend only on the master seed, scenario, size and
/// replicate, so every method sees the same train/test split. Failed fits
/// become rows with a non-`ok` status instead of aborting the study.
pub fn run_simulation_study(config: &ExperimentConfig) -> Result<StudyTables> {
    config.validate()?;
    let mut cells = Vec::new();
    for &s in &config.scenarios {
        for &n in &config.sizes {
            for r in 0..config.replicates {
                for &m in &config.methods {
                    cells.push((s, n, r, m));
                }
            }
        }
    }
    let results: Vec<CellResult> = config.in_pool(|| {
        cells
            .par_iter()
            .map(|&(s, n, r, m)| run_cell(config, s, n, r, m))
            .collect()
    })?;

    let mut scores = Table::new([
        "scenario", "n", "replicate", "method", "label", "omega", "divergence", "seconds", "status",
    ]);
    for c in &results {
        scores.push(vec![
            c.scenario.to_string(),
            c.n.to_string(),
            c.replicate.to_string(),
            c.method.key().into(),
            c.method.label().into(),
            c.omega.to_string(),
            c.divergence.to_string(),
            c.seconds.to_string(),
            c.status.clone(),
        ]);
    }

    let mut summary = Table::new([
        "scenario", "n", "method", "label", "replicates", "failed", "q1", "median", "q3",
    ]);
    let mut timing = Table::new(["scenario", "n", "method", "label", "mean_seconds", "max_seconds"]);
    for &s in &config.scenarios {
        for &n in &config.sizes {
            for &m in &config.methods {
                let cell: Vec<&CellResult> = results
                    .iter()
                    .filter(|c| c.scenario == s && c.n == n && c.method == m)
                    .collect();
                let div: Vec<f64> = cell.iter().map(|c| c.divergence).collect();
                let failed = cell.iter().filter(|c| c.status != "ok").count();
                let (q1, med, q3) = quartiles(&div).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
                let head = vec![s.to_string(), n.to_string(), m.key().to_string(), m.label().to_string()];
                summary.push(
                    head.iter()
                        .cloned()
                        .chain([cell.len().to_string(), failed.to_string(), q1.to_string(), med.to_string(), q3.to_string()])
                        .collect(),
                );
                let secs: Vec<f64> = cell.iter().map(|c| c.seconds).filter(|v| v.is_finite()).collect();
                let mean = if secs.is_empty() { f64::NAN } else { secs.iter().sum::<f64>() / secs.len() as f64 };
                let max = secs.iter().copied().fold(f64::NAN, f64::max);
                timing.push(head.into_iter().chain([mean.to_string(), max.to_string()]).collect());
            }
        }
    }
    Ok(StudyTables { scores, summary, timing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            scenarios: vec![3],
            sizes: vec![60],
            replicates: 2,
            methods: vec![Method::PolyMcc],
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn one_row_per_replicate() {
        let t = run_simulation_study(&small()).unwrap();
        assert_eq!(t.scores.rows.len(), 2);
        assert_eq!(t.summary.rows.len(), 1);
        assert_eq!(t.timing.rows.len(), 1);
        assert!(t.divergences(3, 60, Method::PolyMcc).iter().all(|d| d.is_finite() && *d >= 0.0));
    }

    #[test]
    fn same_seed_same_scores() {
        let mut c = small();
        c.methods.push(Method::OlsGaussian);
        let a = run_simulation_study(&c).unwrap();
        let b = run_simulation_study(&ExperimentConfig { threads: Some(1), ..c }).unwrap();
        let strip = |t: &Table| t.rows.iter().map(|r| r[..7].to_vec()).collect::<Vec<_>>();
        assert_eq!(strip(&a.scores), strip(&b.scores));
    }

    #[test]
    fn config_files_parse() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        std::fs::write(&toml_path, "scenarios = [2]\nsizes = [200, 1000]\nmethods = [\"mlp-ipp\"]\n[sgd]\ntotal_steps = 50\n").unwrap();
        let c = ExperimentConfig::load(&toml_path).unwrap();
        assert_eq!(c.sizes, vec![200, 1000]);
        assert_eq!(c.methods, vec![Method::MlpIpp]);
        assert_eq!(c.sgd.total_steps, 50);
        assert_eq!(c.sgd.batch_size, 50);
        let json_path = dir.path().join("c.json");
        std::fs::write(&json_path, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::load(&json_path).unwrap(), c);
        assert!(ExperimentConfig { methods: vec![], ..c }.validate().is_err());
    }
}

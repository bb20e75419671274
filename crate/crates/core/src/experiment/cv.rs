use rayon::prelude::*;

use super::{derive_seed, FitSettings, FittedModel, Method};
use crate::dataset::{kfold_by_group, Dataset, Table};
use crate::error::{invalid, Result};
use crate::eval::ScoreReport;

/// One method fit on the training folds and scored on the held-out fold.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub method: Method,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub model: FittedModel,
    pub crps: ScoreReport,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub folds: Vec<FoldResult>,
    /// Per method: fold-mean CRPS values with their mean and standard error.
    pub reports: Vec<(Method, ScoreReport)>,
}

impl CvOutcome {
    /// `method, label, folds, mean_crps, se` rows.
    pub fn table(&self) -> Table {
        let mut t = Table::new(["method", "label", "folds", "mean_crps", "se"]);
        for (m, r) in &self.reports {
            t.push(vec![
                m.key().into(),
                m.label().into(),
                r.scores.len().to_string(),
                r.mean.to_string(),
                r.standard_error.to_string(),
            ]);
        }
        t
    }

    /// `fold, method, train_rows, test_rows, mean_crps` rows.
    pub fn fold_table(&self) -> Table {
        let mut t = Table::new(["fold", "method", "train_rows", "test_rows", "mean_crps"]);
        for f in &self.folds {
            t.push(vec![
                f.fold.to_string(),
                f.method.key().into(),
                f.train_rows.len().to_string(),
                f.test_rows.len().to_string(),
                f.crps.mean.to_string(),
            ]);
        }
        t
    }
}

/// k-fold cross-validated CRPS. Folds never split a group. Everything fitted
/// (normalization, transform, q-model) sees the training folds only.
pub fn run_cv(
    data: &Dataset,
    k: usize,
    settings: &[FitSettings],
    seed: u64,
    grid_points: usize,
) -> Result<CvOutcome> {
    if settings.is_empty() {
        return Err(invalid("no methods to cross-validate"));
    }
    let folds = kfold_by_group(data, k, seed)?;
    if let Some(i) = folds.iter().position(|f| f.test.is_empty()) {
        return Err(invalid(format!("fold {i} has no test rows")));
    }
    let jobs: Vec<(usize, &FitSettings)> = (0..k).flat_map(|f| settings.iter().map(move |s| (f, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(f, s)| {
            let fold = &folds[f];
            let train = data.subset(&fold.train);
            let test = data.subset(&fold.test);
            let model = FittedModel::fit(&train, s, derive_seed(seed, &[f as u64, s.method.index()]))?;
            let crps = model.crps(&test, grid_points)?;
            Ok(FoldResult {
                fold: f,
                method: s.method,
                train_rows: fold.train.clone(),
                test_rows: fold.test.clone(),
                model,
                crps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = settings
        .iter()
        .map(|s| {
            let means: Vec<f64> = results.iter().filter(|r| r.method == s.method).map(|r| r.crps.mean).collect();
            let range = results
                .iter()
                .find(|r| r.method == s.method)
                .map(|r| r.crps.range)
                .unwrap_or((f64::NAN, f64::NAN));
            (s.method, ScoreReport::new(means, crate::eval::DEFAULT_GRID_POINTS, range))
        })
        .collect();
    Ok(CvOutcome { folds: results, reports })
}

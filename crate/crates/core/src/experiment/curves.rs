use ndarray::Array2;

use super::FittedModel;
use crate::dataset::Table;
use crate::error::{invalid, CdeError, Result};
use crate::predict::GridMode;

/// Raw covariate rows varying `column` over `[lo, hi]` with the other
/// columns held at their training means.
pub fn covariate_sweep(model: &FittedModel, column: usize, lo: f64, hi: f64, count: usize) -> Result<Array2<f64>> {
    let p = model.normalization.mean.len();
    if column >= p {
        return Err(CdeError::Dimension { expected: p, got: column });
    }
    if count < 1 || !(hi >= lo) {
        return Err(invalid("sweep needs count >= 1 and lo <= hi"));
    }
    Ok(Array2::from_shape_fn((count, p), |(i, j)| {
        if j == column {
            if count == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            }
        } else {
            model.normalization.mean[j]
        }
    }))
}

/// Quantile-grid predictive distributions in long format, one block of `l`
/// rows per covariate row: `point, <covariates>, level, y, probability`.
///
/// For display, the outermost quantile probabilities are set to zero and
/// the interior is renormalized to sum to one.
pub fn emit_quantile_curves(
    model: &FittedModel,
    covariates: &Array2<f64>,
    column_names: &[String],
    l: usize,
) -> Result<Table> {
    if column_names.len() != covariates.ncols() {
        return Err(CdeError::Dimension {
            expected: covariates.ncols(),
            got: column_names.len(),
        });
    }
    if l < 3 {
        return Err(invalid("quantile curves need at least three levels"));
    }
    let mut columns = vec!["point".to_string()];
    columns.extend(column_names.iter().cloned());
    columns.extend(["level", "y", "probability"].map(String::from));
    let mut table = Table::new(columns);
    for (i, row) in covariates.rows().into_iter().enumerate() {
        let de = model.density(row, l, GridMode::Quantile)?;
        let interior: f64 = de.probabilities[1..l - 1].iter().sum();
        for k in 0..l {
            let prob = if k == 0 || k == l - 1 { 0.0 } else { de.probabilities[k] / interior };
            let mut cells = vec![i.to_string()];
            cells.extend(row.iter().map(|v| v.to_string()));
            cells.extend([de.z_grid[k].to_string(), de.y_grid[k].to_string(), prob.to_string()]);
            table.push(cells);
        }
    }
    Ok(table)
}

//! Tabular data: loading, z-score normalization, grouped fold assignment and
//! plain delimited tables for results.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CdeError, Result};

/// Cell tokens treated as missing.
const MISSING_TOKENS: [&str; 2] = ["", "NA"];

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell.trim())
}

/// Feature matrix, response vector and optional group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub response: Array1<f64>,
    pub groups: Option<Vec<String>>,
    pub column_names: Vec<String>,
    pub response_name: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        response: Array1<f64>,
        groups: Option<Vec<String>>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 || features.ncols() == 0 {
            return Err(invalid("dataset needs at least one row and one feature"));
        }
        if response.len() != n {
            return Err(CdeError::Dimension {
                expected: n,
                got: response.len(),
            });
        }
        if let Some(g) = &groups {
            if g.len() != n {
                return Err(CdeError::Dimension {
                    expected: n,
                    got: g.len(),
                });
            }
        }
        if column_names.len() != features.ncols() {
            return Err(CdeError::Dimension {
                expected: features.ncols(),
                got: column_names.len(),
            });
        }
        if features.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("dataset values must be finite"));
        }
        Ok(Self {
            features,
            response,
            groups,
            column_names,
            response_name: "y".to_string(),
        })
    }

    /// Dataset with generated column names `x1..xp`.
    pub fn from_arrays(features: Array2<f64>, response: Array1<f64>) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(features, response, None, names)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.n() {
            return Err(CdeError::Dimension {
                expected: self.n(),
                got: groups.len(),
            });
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            response: indices.iter().map(|&i| self.response[i]).collect(),
            groups: self
                .groups
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
            column_names: self.column_names.clone(),
            response_name: self.response_name.clone(),
        }
    }

    /// Minimum and maximum of the response.
    pub fn response_range(&self) -> (f64, f64) {
        self.response
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            })
    }

    /// Writes the dataset as a comma-separated table: features, response, then group.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut table = Table::new(
            self.column_names
                .iter()
                .cloned()
                .chain(std::iter::once(self.response_name.clone()))
                .chain(self.groups.as_ref().map(|_| "group".to_string())),
        );
        for i in 0..self.n() {
            let mut row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            row.push(self.response[i].to_string());
            if let Some(g) = &self.groups {
                row.push(g[i].clone());
            }
            table.rows.push(row);
        }
        table.write_csv(path)
    }
}

/// Options for [`load_table`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub response: String,
    pub group: Option<String>,
    pub delimiter: u8,
    /// Keep only rows whose `column` equals `value` (string comparison).
    pub filter: Option<(String, String)>,
    /// Columns to ignore entirely.
    pub exclude: Vec<String>,
}

impl LoadOptions {
    pub fn new(response: impl Into<String>) -> Self {
        Self {
            response: response.into(),
            group: None,
            delimiter: b',',
            filter: None,
            exclude: Vec::new(),
        }
    }

    pub fn group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }
}

/// Result of [`load_table`]: the cleaned dataset plus row bookkeeping.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: Dataset,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

/// Loads a delimited text file with a header row. Rows with a missing
/// response are dropped; a missing feature value is an error.
pub fn load_table(path: &Path, opts: &LoadOptions) -> Result<Loaded> {
    let file = File::open(path).map_err(|source| CdeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CdeError::UnknownColumn(name.to_string()))
    };
    let response_idx = find(&opts.response)?;
    let group_idx = opts.group.as_deref().map(find).transpose()?;
    let filter = opts
        .filter
        .as_ref()
        .map(|(c, v)| find(c).map(|i| (i, v.clone())))
        .transpose()?;
    for name in &opts.exclude {
        find(name)?;
    }
    let filter_idx = filter.as_ref().map(|(i, _)| *i);
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&j| j != response_idx && Some(j) != group_idx && Some(j) != filter_idx)
        .filter(|&j| !opts.exclude.contains(&headers[j]))
        .collect();
    if feature_idx.is_empty() {
        return Err(invalid("table has no feature columns"));
    }

    let mut values = Vec::new();
    let mut response = Vec::new();
    let mut groups = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if let Some((i, v)) = &filter {
            if record.get(*i).map(str::trim) != Some(v.as_str()) {
                continue;
            }
        }
        rows_read += 1;
        let raw_y = record.get(response_idx).unwrap_or("");
        if is_missing(raw_y) {
            rows_dropped += 1;
            continue;
        }
        response.push(parse_cell(raw_y, &headers[response_idx], row)?);
        for &j in &feature_idx {
            let cell = record.get(j).unwrap_or("");
            if is_missing(cell) {
                return Err(CdeError::MissingFeature {
                    column: headers[j].clone(),
                    row,
                });
            }
            values.push(parse_cell(cell, &headers[j], row)?);
        }
        if let Some(g) = group_idx {
            groups.push(record.get(g).unwrap_or("").trim().to_string());
        }
    }
    if response.is_empty() {
        return Err(CdeError::NoUsableRows);
    }
    let n = response.len();
    let features = Array2::from_shape_vec((n, feature_idx.len()), values)
        .expect("row-major buffer matches shape");
    let names = feature_idx.iter().map(|&j| headers[j].clone()).collect();
    let mut data = Dataset::new(
        features,
        Array1::from(response),
        group_idx.map(|_| groups),
        names,
    )?;
    data.response_name = opts.response.clone();
    Ok(Loaded {
        data,
        rows_read,
        rows_dropped,
    })
}

fn parse_cell(cell: &str, column: &str, row: usize) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CdeError::NonNumeric {
            column: column.to_string(),
            row,
            value: cell.to_string(),
        })
}

/// Per-column location and scale used to z-score features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl NormalizationParams {
    /// Applies the z-score map to a single feature vector.
    pub fn apply_row(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.mean.len() {
            return Err(CdeError::Dimension {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    /// Inverse map: normalized features back to the original scale.
    pub fn invert(&self, normalized: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(normalized.ncols())?;
        let mut out = normalized.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v * self.sd[j] + self.mean[j]);
        }
        Ok(out)
    }

    fn check(&self, p: usize) -> Result<()> {
        if p != self.mean.len() {
            return Err(CdeError::Dimension {
                expected: self.mean.len(),
                got: p,
            });
        }
        Ok(())
    }
}

/// Column means and sample standard deviations (divisor n - 1).
pub fn fit_normalization(data: &Dataset) -> Result<NormalizationParams> {
    let n = data.n();
    if n < 2 {
        return Err(invalid("normalization needs at least two rows"));
    }
    let mut mean = Vec::with_capacity(data.p());
    let mut sd = Vec::with_capacity(data.p());
    for (j, col) in data.features.axis_iter(Axis(1)).enumerate() {
        let m = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        let s = (ss / (n - 1) as f64).sqrt();
        if !(s > 0.0) {
            return Err(CdeError::ZeroVariance(data.column_names[j].clone()));
        }
        mean.push(m);
        sd.push(s);
    }
    Ok(NormalizationParams { mean, sd })
}

/// Replaces every feature column `x` with `(x - mean) / sd`.
pub fn apply_normalization(data: &Dataset, params: &NormalizationParams) -> Result<Dataset> {
    params.check(data.p())?;
    let mut out = data.clone();
    for (j, mut col) in out.features.axis_iter_mut(Axis(1)).enumerate() {
        let (m, s) = (params.mean[j], params.sd[j]);
        col.mapv_inplace(|v| (v - m) / s);
    }
    Ok(out)
}

/// Train/test row indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Randomly assigns groups (or rows, when the dataset has no groups) to `k`
/// folds. Groups are never split across folds.
pub fn kfold_by_group(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(invalid("k-fold splitting needs k >= 2"));
    }
    // unit id per row
    let (unit_of_row, units): (Vec<usize>, usize) = match &data.groups {
        Some(groups) => {
            let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
            for g in groups {
                ids.entry(g.as_str()).or_insert(0);
            }
            for (i, v) in ids.values_mut().enumerate() {
                *v = i;
            }
            (groups.iter().map(|g| ids[g.as_str()]).collect(), ids.len())
        }
        None => ((0..data.n()).collect(), data.n()),
    };
    if units < k {
        return Err(CdeError::TooFewGroups { groups: units, folds: k });
    }
    let mut order: Vec<usize> = (0..units).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of_unit = vec![0; units];
    for (pos, &u) in order.iter().enumerate() {
        fold_of_unit[u] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..data.n()).partition(|&i| fold_of_unit[unit_of_row[i]] == f);
            Fold { train, test }
        })
        .collect())
}

/// A plain header-plus-rows table of string cells, written as CSV.
///
/// Numbers are formatted with `f64`'s shortest round-trip representation, so
/// reading a written table back yields bit-identical values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<I, S>(columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses column `name` as numbers.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .column(name)
            .ok_or_else(|| CdeError::UnknownColumn(name.to_string()))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| parse_cell(&r[j], name, i))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|source| CdeError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_preserves_order() {
        let f = write_tmp("x,y\n1,10\n2,20\n3,30\n");
        let l = load_table(f.path(), &LoadOptions::new("y")).unwrap();
        assert_eq!(l.data.n(), 3);
        assert_eq!(l.data.response.to_vec(), vec![10.0, 20.0, 30.0]);
        assert_eq!(l.data.features.column(0).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn load_drops_missing_responses() {
        let f = write_tmp("x,y,storm\n1,10,a\n2,,a\n3,NA,b\n4,40,b\n5,50,c\n");
        let l = load_table(f.path(), &LoadOptions::new("y").group("storm")).unwrap();
        assert_eq!(l.data.n(), 3);
        assert_eq!(l.rows_read, 5);
        assert_eq!(l.rows_dropped, 2);
        assert_eq!(l.data.groups.unwrap(), vec!["a", "b", "c"]);
    }

    #[test]
    fn load_errors() {
        let f = write_tmp("x,y\n1,NA\n2,\n");
        assert!(matches!(
            load_table(f.path(), &LoadOptions::new("y")),
            Err(CdeError::NoUsableRows)
        ));
        let f = write_tmp("x,y\n1,2\n");
        assert!(matches!(
            load_table(f.path(), &LoadOptions::new("z")),
            Err(CdeError::UnknownColumn(_))
        ));
        let f = write_tmp("x,y\nabc,2\n");
        assert!(matches!(
            load_table(f.path(), &LoadOptions::new("y")),
            Err(CdeError::NonNumeric { .. })
        ));
        let f = write_tmp("x,y\n,2\n");
        assert!(matches!(
            load_table(f.path(), &LoadOptions::new("y")),
            Err(CdeError::MissingFeature { .. })
        ));
        assert!(matches!(
            load_table(Path::new("/nonexistent/file.csv"), &LoadOptions::new("y")),
            Err(CdeError::Io { .. })
        ));
    }

    #[test]
    fn load_with_filter_and_delimiter() {
        let f = write_tmp("lag;x;y\n3;1;10\n6;2;20\n3;3;30\n");
        let mut opts = LoadOptions::new("y");
        opts.delimiter = b';';
        opts.filter = Some(("lag".into(), "3".into()));
        let l = load_table(f.path(), &opts).unwrap();
        assert_eq!(l.data.response.to_vec(), vec![10.0, 30.0]);
        assert_eq!(l.data.column_names, vec!["x"]);
    }

    #[test]
    fn normalization_statistics() {
        let d = Dataset::from_arrays(array![[1.0], [2.0], [3.0]], array![0.0, 0.0, 0.0]).unwrap();
        let p = fit_normalization(&d).unwrap();
        assert_eq!(p.mean, vec![2.0]);
        assert_eq!(p.sd, vec![1.0]);

        let z = Dataset::from_arrays(array![[-1.0], [0.0], [1.0]], array![0.0, 0.0, 0.0]).unwrap();
        let p = fit_normalization(&z).unwrap();
        assert_eq!((p.mean[0], p.sd[0]), (0.0, 1.0));

        let c = Dataset::from_arrays(array![[4.0], [4.0], [4.0]], array![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(fit_normalization(&c), Err(CdeError::ZeroVariance(name)) if name == "x1"));
    }

    #[test]
    fn apply_normalization_cases() {
        let params = NormalizationParams {
            mean: vec![2.0],
            sd: vec![1.0],
        };
        let test = Dataset::from_arrays(array![[5.0]], array![1.0]).unwrap();
        assert_eq!(apply_normalization(&test, &params).unwrap().features[[0, 0]], 3.0);

        let wide = Dataset::from_arrays(array![[5.0, 1.0]], array![1.0]).unwrap();
        assert!(matches!(
            apply_normalization(&wide, &params),
            Err(CdeError::Dimension { .. })
        ));

        let train = Dataset::from_arrays(
            array![[1.0, 10.0], [4.0, -2.0], [2.5, 7.0], [9.0, 0.5]],
            array![0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let p = fit_normalization(&train).unwrap();
        let normed = apply_normalization(&train, &p).unwrap();
        let again = fit_normalization(&normed).unwrap();
        for j in 0..2 {
            assert!(again.mean[j].abs() < 1e-14);
            assert!((again.sd[j] - 1.0).abs() < 1e-14);
        }
        assert_eq!(normed.response, train.response);
    }

    fn grouped(groups: usize, per: usize) -> Dataset {
        let n = groups * per;
        let d = Dataset::from_arrays(
            Array2::from_shape_fn((n, 1), |(i, _)| i as f64),
            Array1::zeros(n),
        )
        .unwrap();
        d.with_groups((0..n).map(|i| format!("g{}", i / per)).collect())
            .unwrap()
    }

    #[test]
    fn kfold_groups() {
        let d = grouped(10, 3);
        let folds = kfold_by_group(&d, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let groups = d.groups.as_ref().unwrap();
        for f in &folds {
            let mut gs: Vec<&String> = f.test.iter().map(|&i| &groups[i]).collect();
            gs.sort();
            gs.dedup();
            assert_eq!(gs.len(), 2);
            assert_eq!(f.train.len(), 24);
        }
        assert_eq!(folds, kfold_by_group(&d, 5, 7).unwrap());
        assert!(matches!(
            kfold_by_group(&grouped(3, 2), 5, 1),
            Err(CdeError::TooFewGroups { groups: 3, folds: 5 })
        ));
    }

    #[test]
    fn kfold_rows_without_groups() {
        let d = Dataset::from_arrays(
            Array2::from_shape_fn((23, 1), |(i, _)| i as f64),
            Array1::zeros(23),
        )
        .unwrap();
        let folds = kfold_by_group(&d, 4, 3).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn table_round_trip_is_exact() {
        let mut t = Table::new(["a", "label"]);
        let vals = [0.1 + 0.2, std::f64::consts::PI, -1e-300, 12345.678901234567];
        for v in vals {
            t.push(vec![v.to_string(), "m".into()]);
        }
        let f = tempfile::NamedTempFile::new().unwrap();
        t.write_csv(f.path()).unwrap();
        let back = Table::read_csv(f.path()).unwrap();
        assert_eq!(back, t);
        let parsed = back.numeric_column("a").unwrap();
        for (a, b) in parsed.iter().zip(vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

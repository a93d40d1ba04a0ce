//! Covariate ingestion, scaling and dataset splits.

use std::collections::HashMap;
use std::path::Path;

use log::warn;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::rng;

/// Number of levels used for synthetic discrete columns.
pub const SYNTHETIC_LEVELS: usize = 4;

/// Fractions of units assigned to train / validation / test.
pub const DEFAULT_SPLIT_RATIOS: (f64, f64, f64) = (0.49, 0.21, 0.30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

/// Names the feature columns of a delimited covariate file and which of them
/// are categorical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    /// Feature columns in output order. Empty means every column.
    #[serde(default)]
    pub features: Vec<String>,
    /// Columns to integer-encode by first appearance.
    #[serde(default)]
    pub discrete: Vec<String>,
}

impl ColumnMapping {
    /// The eight pre-treatment covariates of the Hillstrom e-mail campaign
    /// table: one continuous spend column and seven discrete ones.
    pub fn hillstrom() -> Self {
        let discrete = ["recency", "history_segment", "mens", "womens", "zip_code", "newbie", "channel"];
        let mut features = vec!["history".to_string()];
        features.extend(discrete.iter().map(|s| s.to_string()));
        ColumnMapping {
            features,
            discrete: discrete.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// An n×d table of unit features scaled column-wise to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    pub values: Array2<f64>,
    pub column_kinds: Vec<ColumnKind>,
    pub column_names: Vec<String>,
    /// Columns that had zero range before scaling and were set to zero.
    pub constant_columns: Vec<usize>,
}

impl CovariateMatrix {
    pub fn new(values: Array2<f64>, column_kinds: Vec<ColumnKind>, column_names: Vec<String>) -> Result<Self> {
        let (n, d) = values.dim();
        if d == 0 || n < 2 {
            return arg(format!("covariate matrix needs n >= 2 and d >= 1, got {n}x{d}"));
        }
        if column_kinds.len() != d || column_names.len() != d {
            return arg("column metadata length does not match matrix width");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return arg("covariate matrix contains non-finite entries");
        }
        Ok(CovariateMatrix {
            values,
            column_kinds,
            column_names,
            constant_columns: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn has_warnings(&self) -> bool {
        !self.constant_columns.is_empty()
    }

    /// Keep the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> CovariateMatrix {
        CovariateMatrix {
            values: self.values.select(Axis(0), rows),
            column_kinds: self.column_kinds.clone(),
            column_names: self.column_names.clone(),
            constant_columns: self.constant_columns.clone(),
        }
    }

    /// Uniform subsample of `n` units without replacement, kept in original
    /// row order. Returns a clone when `n >= self.n()`.
    pub fn subsample(&self, n: usize, seed: u64) -> CovariateMatrix {
        if n >= self.n() {
            return self.clone();
        }
        let mut stream = rng::stream(seed, "subsample");
        let mut rows = rand::seq::index::sample(&mut stream, self.n(), n).into_vec();
        rows.sort_unstable();
        self.select_rows(&rows)
    }
}

/// Min-max scale every column of `values` in place. Returns the indices of
/// zero-range columns, which are set to all zeros.
pub fn min_max_scale(values: &mut Array2<f64>) -> Vec<usize> {
    let mut constant = Vec::new();
    for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| (v - lo) / range);
        } else {
            constant.push(j);
            col.fill(0.0);
        }
    }
    constant
}

/// Read a comma-separated covariate table with a header row.
///
/// Discrete columns are encoded as ordinals in order of first appearance,
/// then every column is min-max scaled. Without a mapping, all columns are
/// features and a column is discrete when any of its cells is non-numeric.
pub fn load_covariates(path: &Path, mapping: Option<&ColumnMapping>) -> Result<CovariateMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut raw: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        raw.push(record.iter().map(|c| c.trim().to_string()).collect());
    }

    let features: Vec<String> = match mapping {
        Some(m) if !m.features.is_empty() => m.features.clone(),
        _ => headers.clone(),
    };
    if features.is_empty() {
        return arg(format!("{}: no feature columns", path.display()));
    }
    let mut column_idx = Vec::with_capacity(features.len());
    for f in &features {
        match headers.iter().position(|h| h == f) {
            Some(i) => column_idx.push(i),
            None => return arg(format!("{}: column '{f}' not found in header", path.display())),
        }
    }

    let kinds: Vec<ColumnKind> = features
        .iter()
        .zip(&column_idx)
        .map(|(name, &ci)| match mapping {
            Some(m) => {
                if m.discrete.iter().any(|d| d == name) {
                    ColumnKind::Discrete
                } else {
                    ColumnKind::Continuous
                }
            }
            None => {
                if raw.iter().all(|r| r.get(ci).is_some_and(|c| c.parse::<f64>().is_ok())) {
                    ColumnKind::Continuous
                } else {
                    ColumnKind::Discrete
                }
            }
        })
        .collect();

    let n = raw.len();
    let d = features.len();
    let mut values = Array2::<f64>::zeros((n, d));
    for (j, (&ci, kind)) in column_idx.iter().zip(&kinds).enumerate() {
        let mut codes: HashMap<&str, usize> = HashMap::new();
        for (i, row) in raw.iter().enumerate() {
            let cell = row.get(ci).map(String::as_str).unwrap_or("");
            values[[i, j]] = match kind {
                ColumnKind::Continuous => match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(Error::Parse {
                            row: i + 1,
                            column: features[j].clone(),
                            message: format!("cannot parse '{cell}' as a number"),
                        })
                    }
                },
                ColumnKind::Discrete => {
                    if cell.is_empty() {
                        return Err(Error::Parse {
                            row: i + 1,
                            column: features[j].clone(),
                            message: "empty categorical cell".into(),
                        });
                    }
                    let next = codes.len();
                    *codes.entry(cell).or_insert(next) as f64
                }
            };
        }
    }

    let constant = min_max_scale(&mut values);
    for &j in &constant {
        warn!("{}: column '{}' is constant; scaled to zeros", path.display(), features[j]);
    }
    let mut x = CovariateMatrix::new(values, kinds, features)?;
    x.constant_columns = constant;
    Ok(x)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            row: pos.record() as usize,
            column: String::from("?"),
            message: e.to_string(),
        },
        None => Error::Argument(format!("{}: {e}", path.display())),
    }
}

/// Seeded synthetic covariates standing in for the real table.
///
/// The first `d - n_discrete` columns are uniform on [0, 1]; the remaining
/// columns are uniform over the levels {0, 1/3, 2/3, 1}.
pub fn synthesize_covariates(n: usize, d: usize, n_discrete: usize, seed: u64) -> Result<CovariateMatrix> {
    if n_discrete > d {
        return arg(format!("n_discrete ({n_discrete}) exceeds d ({d})"));
    }
    let n_cont = d - n_discrete;
    let mut stream = rng::stream(seed, "covariates");
    let top = (SYNTHETIC_LEVELS - 1) as f64;
    let mut values = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            values[[i, j]] = if j < n_cont {
                stream.random::<f64>()
            } else {
                stream.random_range(0..SYNTHETIC_LEVELS) as f64 / top
            };
        }
    }
    let kinds = (0..d)
        .map(|j| if j < n_cont { ColumnKind::Continuous } else { ColumnKind::Discrete })
        .collect();
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    CovariateMatrix::new(values, kinds, names)
}

/// Disjoint train / validation / test index sets covering 0..n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Seeded shuffle of 0..n cut at ⌊r_train·n⌋ and ⌊r_train·n⌋ + ⌊r_val·n⌋.
pub fn split(n: usize, ratios: (f64, f64, f64), seed: u64) -> Result<SplitIndices> {
    let (a, b, c) = ratios;
    if n < 3 {
        return arg(format!("split needs n >= 3, got {n}"));
    }
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return arg(format!("split ratios must be positive and sum to 1, got {ratios:?}"));
    }
    let n_train = floor_count(a, n);
    let n_val = floor_count(b, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split"));
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(SplitIndices { train: order, val, test })
}

/// ⌊fraction·n⌋, tolerant of representation error in `fraction`.
pub(crate) fn floor_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Observed learning sample: features, treatment indicator, factual outcome,
/// and optionally the true individual effect for oracle scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Array2<f64>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub tau: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(x: Array2<f64>, t: Vec<f64>, y: Vec<f64>, tau: Option<Vec<f64>>) -> Result<Self> {
        let n = x.nrows();
        if t.len() != n || y.len() != n || tau.as_ref().is_some_and(|v| v.len() != n) {
            return arg("sample fields have mismatched lengths");
        }
        if t.iter().any(|&v| v != 0.0 && v != 1.0) {
            return arg("treatment indicator must be 0 or 1");
        }
        Ok(Sample { x, t, y, tau })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.t.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn select(&self, rows: &[usize]) -> Sample {
        Sample {
            x: self.x.select(Axis(0), rows),
            t: rows.iter().map(|&i| self.t[i]).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            tau: self.tau.as_ref().map(|v| rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

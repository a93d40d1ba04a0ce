//! Delimited-text dataset files and their metadata sidecar.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DgpConfig, SemiSyntheticDataset};
use crate::data::Sample;
use crate::error::{arg, Error, Result};
use crate::rng;

/// Sidecar written next to every dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub n: usize,
    pub d: usize,
    pub d_obs: usize,
    pub obs_columns: Vec<usize>,
    pub config: DgpConfig,
    pub coefficient_checksums: BTreeMap<String, String>,
    pub covariate_checksum: String,
}

/// The columns of a dataset file read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    pub ids: Vec<usize>,
    pub x_true: Array2<f64>,
    pub x_obs: Array2<f64>,
    pub t: Vec<f64>,
    pub propensity: Vec<f64>,
    pub y: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub tau: Vec<f64>,
}

impl DatasetTable {
    pub fn sample(&self) -> Sample {
        Sample {
            x: self.x_obs.clone(),
            t: self.t.clone(),
            y: self.y.clone(),
            tau: Some(self.tau.clone()),
        }
    }
}

pub fn metadata_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

/// Write `id, x1..xd, xobs1..xobs_dobs, t, propensity, y, y0, y1, tau` and the
/// metadata sidecar `<path>.meta.toml`.
pub fn write_dataset(ds: &SemiSyntheticDataset, path: &Path) -> Result<()> {
    let d = ds.x_true.d();
    let d_obs = ds.x_obs.ncols();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut header = vec!["id".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    header.extend((1..=d_obs).map(|j| format!("xobs{j}")));
    header.extend(["t", "propensity", "y", "y0", "y1", "tau"].map(String::from));
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io_err)?;
    for i in 0..ds.n() {
        let mut line = i.to_string();
        for v in ds.x_true.values.row(i).iter().chain(ds.x_obs.row(i).iter()) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        for v in [ds.t[i], ds.propensity[i], ds.y[i], ds.y0[i], ds.y1[i], ds.tau[i]] {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;

    let meta = DatasetMetadata {
        n: ds.n(),
        d,
        d_obs,
        obs_columns: ds.obs_columns.clone(),
        config: ds.config,
        coefficient_checksums: ds.coefficients.checksums().into_iter().collect(),
        covariate_checksum: rng::checksum(ds.x_true.values.iter().copied()),
    };
    let meta_path = metadata_path(path);
    let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
}

pub fn read_metadata(path: &Path) -> Result<DatasetMetadata> {
    let meta_path = metadata_path(path);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))
}

fn is_indexed(name: &str, prefix: &str) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

pub fn read_dataset(path: &Path) -> Result<DatasetTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Argument(format!("{}: missing column '{name}'", path.display())))
    };
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&c| is_indexed(&headers[c], "x")).collect();
    let obs_cols: Vec<usize> = (0..headers.len()).filter(|&c| is_indexed(&headers[c], "xobs")).collect();
    let [id, t, p, y, y0, y1, tau] = ["id", "t", "propensity", "y", "y0", "y1", "tau"].map(find);
    let (id, t, p, y, y0, y1, tau) = (id?, t?, p?, y?, y0?, y1?, tau?);
    if obs_cols.is_empty() {
        return arg(format!("{}: no xobs columns", path.display()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?;
        let mut parsed = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            parsed.push(cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                row: r + 1,
                column: headers.get(c).cloned().unwrap_or_default(),
                message: format!("cannot parse '{cell}' as a number"),
            })?);
        }
        if parsed.len() != headers.len() {
            return Err(Error::Parse {
                row: r + 1,
                column: String::from("*"),
                message: format!("expected {} cells, found {}", headers.len(), parsed.len()),
            });
        }
        rows.push(parsed);
    }
    let n = rows.len();
    let col = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let table = DatasetTable {
        ids: rows.iter().map(|r| r[id] as usize).collect(),
        x_true: Array2::from_shape_fn((n, x_cols.len()), |(i, j)| rows[i][x_cols[j]]),
        x_obs: Array2::from_shape_fn((n, obs_cols.len()), |(i, j)| rows[i][obs_cols[j]]),
        t: col(t),
        propensity: col(p),
        y: col(y),
        y0: col(y0),
        y1: col(y1),
        tau: col(tau),
    };
    if table.t.iter().any(|&v| v != 0.0 && v != 1.0) {
        return arg(format!("{}: treatment column must be 0/1", path.display()));
    }
    Ok(table)
}

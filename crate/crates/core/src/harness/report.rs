//! Report tables written from a results table.
//!
//! CSV output is one file per table: `mean_<metric>_k<k>.csv` and
//! `std_<metric>_k<k>.csv` (models × setting-knob cells),
//! `radar_<metric>_k<k>.csv` (per-model ranks per cell) and
//! `rank_corr_k<k>.csv` (practical metrics × cells). JSON output carries the
//! same tables in a single `report.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::results::{aggregate, rank_correlation_table, Cell, ResultsTable};
use crate::error::{arg, Error, Result};
use crate::metrics::MetricKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => arg(format!("unknown report format '{other}' (expected csv or json)")),
        }
    }
}

/// A models × cells matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub k: f64,
    pub metric: MetricKind,
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    pub rank: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub k: f64,
    /// Rows follow Uplift, AUUC, Qini; columns follow `cells`.
    pub metrics: Vec<MetricKind>,
    pub values: Vec<Vec<Option<f64>>>,
    pub excluded_runs: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub cells: Vec<String>,
    pub models: Vec<String>,
    pub k_list: Vec<f64>,
    pub n_runs: usize,
    pub tables: Vec<MetricTable>,
    pub rank_correlation: Vec<CorrelationTable>,
}

/// Assemble every report table from raw rows.
pub fn build_report(table: &ResultsTable) -> Result<Report> {
    let agg = aggregate(table)?;
    let cells = table.cells();
    let models = table.models();
    let k_list = table.k_list();
    let lookup = |cell: Cell, k: f64, metric: MetricKind, model: &str| {
        agg.get(cell, k, metric, model)
            .ok_or_else(|| Error::Aggregation(format!("no aggregate for {model} in {}", cell.label())))
    };
    let mut tables = Vec::new();
    for &k in &k_list {
        for metric in MetricKind::ALL {
            let (mut mean, mut std, mut rank) = (Vec::new(), Vec::new(), Vec::new());
            for model in &models {
                let rows: Vec<_> = cells.iter().map(|&c| lookup(c, k, metric, model)).collect::<Result<_>>()?;
                mean.push(rows.iter().map(|r| r.mean).collect());
                std.push(rows.iter().map(|r| r.std).collect());
                rank.push(rows.iter().map(|r| r.rank).collect());
            }
            tables.push(MetricTable { k, metric, mean, std, rank });
        }
    }
    let corr = if models.iter().filter(|m| m.as_str() != super::results::ORACLE_MODEL).count() >= 2 {
        rank_correlation_table(table)?
    } else {
        Vec::new()
    };
    let mut rank_correlation = Vec::new();
    if !corr.is_empty() {
        for &k in &k_list {
            let mut values = Vec::new();
            let mut excluded = Vec::new();
            for metric in MetricKind::PRACTICAL {
                let row: Vec<_> = cells
                    .iter()
                    .map(|c| {
                        corr.iter()
                            .find(|r| r.setting == c.setting && r.knob == c.knob && r.k == k && r.metric == metric)
                            .expect("correlation computed for every cell")
                    })
                    .collect();
                values.push(row.iter().map(|r| r.mean).collect());
                excluded.push(row.iter().map(|r| r.n_excluded).collect());
            }
            rank_correlation.push(CorrelationTable {
                k,
                metrics: MetricKind::PRACTICAL.to_vec(),
                values,
                excluded_runs: excluded,
            });
        }
    }
    Ok(Report {
        cells: cells.iter().map(|c| c.label()).collect(),
        models,
        k_list,
        n_runs: table.runs().len(),
        tables,
        rank_correlation,
    })
}

fn matrix_csv<T: std::fmt::Display>(first: &str, cols: &[String], rows: &[String], values: &[Vec<T>]) -> String {
    let mut s = String::new();
    s.push_str(first);
    for c in cols {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (name, row) in rows.iter().zip(values) {
        s.push_str(name);
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn write(dir: &Path, name: String, contents: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
    out.push(p);
    Ok(())
}

/// Write the report into `dir`; returns the files written.
pub fn emit_report(table: &ResultsTable, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    let report = build_report(table)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
            s.push('\n');
            write(dir, "report.json".into(), &s, &mut out)?;
        }
        ReportFormat::Csv => {
            for t in &report.tables {
                let m = t.metric.name();
                write(dir, format!("mean_{m}_k{}.csv", t.k), &matrix_csv("model", &report.cells, &report.models, &t.mean), &mut out)?;
                write(dir, format!("std_{m}_k{}.csv", t.k), &matrix_csv("model", &report.cells, &report.models, &t.std), &mut out)?;
                write(dir, format!("radar_{m}_k{}.csv", t.k), &matrix_csv("model", &report.cells, &report.models, &t.rank), &mut out)?;
            }
            for c in &report.rank_correlation {
                let names: Vec<String> = c.metrics.iter().map(|m| m.name().to_string()).collect();
                let vals: Vec<Vec<String>> = c
                    .values
                    .iter()
                    .map(|row| row.iter().map(|v| v.map_or(String::new(), |v| v.to_string())).collect())
                    .collect();
                write(dir, format!("rank_corr_k{}.csv", c.k), &matrix_csv("metric", &report.cells, &names, &vals), &mut out)?;
            }
        }
    }
    Ok(out)
}

//! Per-run result rows, aggregation over runs and rank correlations.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dgp::Setting;
use crate::error::{Error, Result};
use crate::metrics::{spearman_rank_corr, MetricKind};

/// Name of the injected model that predicts the true effect.
pub const ORACLE_MODEL: &str = "Oracle";

/// One metric value of one model in one run of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub setting: Setting,
    pub knob: f64,
    pub model: String,
    pub run: usize,
    pub k: f64,
    pub metric: MetricKind,
    pub value: f64,
}

/// A (setting, knob) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub setting: Setting,
    pub knob: f64,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("{}:{}", self.setting, self.knob)
    }
}

/// Raw per-run results with the grid they were produced on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// Distinct values in order of first appearance.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|c| c.setting == r.setting && c.knob == r.knob) {
                out.push(Cell {
                    setting: r.setting,
                    knob: r.knob,
                });
            }
        }
        out
    }

    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.model) {
                out.push(r.model.clone());
            }
        }
        out
    }

    pub fn k_list(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.k) {
                out.push(r.k);
            }
        }
        out
    }

    pub fn runs(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.rows.iter().map(|r| r.run).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn value(&self, cell: Cell, model: &str, run: usize, k: f64, metric: MetricKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.setting == cell.setting && r.knob == cell.knob && r.model == model && r.run == run && r.k == k && r.metric == metric)
            .map(|r| r.value)
    }

    fn index(&self) -> RowIndex<'_> {
        let mut map = HashMap::with_capacity(self.rows.len());
        for r in &self.rows {
            map.insert((r.setting, r.knob.to_bits(), r.model.as_str(), r.run, r.k.to_bits(), r.metric), r.value);
        }
        RowIndex(map)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "setting,knob,model,run,k,metric,value").map_err(io)?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{},{}", r.setting, r.knob, r.model, r.run, r.k, r.metric.name(), r.value).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                row: 0,
                column: String::new(),
                message: format!("{other:?}"),
            },
        })?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                column: String::new(),
                message: e.to_string(),
            })?
            .clone();
        let expected = ["setting", "knob", "model", "run", "k", "metric", "value"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                row: 1,
                column: String::new(),
                message: format!("expected header {}", expected.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                column: String::new(),
                message: e.to_string(),
            })?;
            let bad = |col: &str, msg: &str| Error::Parse {
                row,
                column: col.to_string(),
                message: msg.to_string(),
            };
            let num = |j: usize| rec[j].parse::<f64>().map_err(|e| bad(expected[j], &e.to_string()));
            rows.push(ResultRow {
                setting: Setting::parse(&rec[0]).ok_or_else(|| bad("setting", "unknown setting"))?,
                knob: num(1)?,
                model: rec[2].to_string(),
                run: rec[3].parse().map_err(|_| bad("run", "not an integer"))?,
                k: num(4)?,
                metric: MetricKind::parse(&rec[5]).ok_or_else(|| bad("metric", "unknown metric"))?,
                value: num(6)?,
            });
        }
        Ok(ResultsTable { rows })
    }
}

type RowKey<'a> = (Setting, u64, &'a str, usize, u64, MetricKind);

struct RowIndex<'a>(HashMap<RowKey<'a>, f64>);

impl RowIndex<'_> {
    fn value(&self, cell: Cell, model: &str, run: usize, k: f64, metric: MetricKind) -> Option<f64> {
        self.0.get(&(cell.setting, cell.knob.to_bits(), model, run, k.to_bits(), metric)).copied()
    }
}

/// Mean, sample standard deviation and rank of one model in one
/// (setting, knob, k, metric) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub setting: Setting,
    pub knob: f64,
    pub k: f64,
    pub metric: MetricKind,
    pub model: String,
    pub mean: f64,
    pub std: f64,
    pub n_runs: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub rows: Vec<AggregateRow>,
}

impl Aggregates {
    pub fn get(&self, cell: Cell, k: f64, metric: MetricKind, model: &str) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.setting == cell.setting && r.knob == cell.knob && r.k == k && r.metric == metric && r.model == model)
    }
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// 1-based ordinal ranks of `means`: ascending when lower is better,
/// descending otherwise; ties go to the earlier entry.
pub fn ordinal_ranks(means: &[f64], lower_is_better: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..means.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = means[a].total_cmp(&means[b]);
        let ord = if lower_is_better { ord } else { ord.reverse() };
        ord.then(a.cmp(&b))
    });
    let mut ranks = vec![0; means.len()];
    for (r, i) in idx.into_iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Means, standard deviations and ranks over the full run grid.
pub fn aggregate(table: &ResultsTable) -> Result<Aggregates> {
    let runs = table.runs();
    let models = table.models();
    let index = table.index();
    if runs.is_empty() {
        return Err(Error::Aggregation("no result rows".into()));
    }
    let mut out = Vec::new();
    for cell in table.cells() {
        for &k in &table.k_list() {
            for metric in MetricKind::ALL {
                let mut means = Vec::with_capacity(models.len());
                let mut stds = Vec::with_capacity(models.len());
                for model in &models {
                    let mut vals = Vec::with_capacity(runs.len());
                    for &run in &runs {
                        match index.value(cell, model, run, k, metric) {
                            Some(v) => vals.push(v),
                            None => {
                                return Err(Error::Aggregation(format!(
                                    "missing {} for {model} in cell {} at k={k}, run {run}",
                                    metric.name(),
                                    cell.label()
                                )))
                            }
                        }
                    }
                    let (m, s) = mean_std(&vals);
                    means.push(m);
                    stds.push(s);
                }
                let ranks = ordinal_ranks(&means, !metric.higher_is_better());
                for (i, model) in models.iter().enumerate() {
                    out.push(AggregateRow {
                        setting: cell.setting,
                        knob: cell.knob,
                        k,
                        metric,
                        model: model.clone(),
                        mean: means[i],
                        std: stds[i],
                        n_runs: runs.len(),
                        rank: ranks[i],
                    });
                }
            }
        }
    }
    Ok(Aggregates { rows: out })
}

/// Spearman correlation of a practical metric's model ranking with the
/// oracle ATE ranking, averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub setting: Setting,
    pub knob: f64,
    pub k: f64,
    pub metric: MetricKind,
    /// Mean over the runs with a defined coefficient; `None` if there are none.
    pub mean: Option<f64>,
    pub n_used: usize,
    pub n_excluded: usize,
}

/// Per (setting, knob, k, practical metric). The injected oracle model, if
/// present, is left out of the correlated vectors.
pub fn rank_correlation_table(table: &ResultsTable) -> Result<Vec<RankCorrelation>> {
    let models: Vec<String> = table.models().into_iter().filter(|m| m != ORACLE_MODEL).collect();
    if models.len() < 2 {
        return Err(Error::Aggregation("rank correlation needs at least two models".into()));
    }
    let runs = table.runs();
    let index = table.index();
    let mut out = Vec::new();
    for cell in table.cells() {
        for &k in &table.k_list() {
            for metric in MetricKind::PRACTICAL {
                let (mut sum, mut used, mut excluded) = (0.0, 0, 0);
                for &run in &runs {
                    let collect = |m: MetricKind| -> Result<Vec<f64>> {
                        models
                            .iter()
                            .map(|model| {
                                index.value(cell, model, run, k, m).ok_or_else(|| {
                                    Error::Aggregation(format!("missing {} for {model} in cell {} run {run}", m.name(), cell.label()))
                                })
                            })
                            .collect()
                    };
                    let a = collect(metric)?;
                    let b = collect(MetricKind::Ate)?;
                    match spearman_rank_corr(&a, &b)? {
                        Some(rho) => {
                            sum += rho;
                            used += 1;
                        }
                        None => excluded += 1,
                    }
                }
                out.push(RankCorrelation {
                    setting: cell.setting,
                    knob: cell.knob,
                    k,
                    metric,
                    mean: (used > 0).then(|| sum / used as f64),
                    n_used: used,
                    n_excluded: excluded,
                });
            }
        }
    }
    Ok(out)
}

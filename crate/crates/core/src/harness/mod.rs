//! The experiment sweep: settings × knobs × runs × learners.
//!
//! Each (setting, knob) cell generates one dataset. Each run re-splits it
//! (when `resplit_per_run` is set), tunes every learner on the validation
//! split, and scores the winning fit on the test split at every k.

pub mod report;
pub mod results;
pub mod tuning;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, ColumnMapping, CovariateMatrix, Sample, DEFAULT_SPLIT_RATIOS};
use crate::dgp::{self, DgpConfig, DgpSeeds, SemiSyntheticDataset};
use crate::error::{Error, Result};
use crate::learners::{LearnerKind, NetConfig, DEFAULT_CLIP_EPS};
use crate::metrics::{evaluate, MetricKind, QiniBaseline};
use crate::rng::derive_seed;

pub use crate::dgp::Setting;
pub use report::{build_report, emit_report, Report, ReportFormat};
pub use results::{aggregate, rank_correlation_table, Aggregates, Cell, RankCorrelation, ResultRow, ResultsTable, ORACLE_MODEL};
pub use tuning::{tune, BaseFamily, SearchSpace, TuningObjective};

pub const DEFAULT_K_LIST: [f64; 4] = [0.1, 0.3, 0.5, 0.7];

/// Everything that determines a sweep. Serialized as TOML field-for-field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub settings: Vec<Setting>,
    /// Knob overrides keyed by setting tag ("A".."D"); missing settings use
    /// the benchmark grid.
    pub knobs: std::collections::BTreeMap<String, Vec<f64>>,
    /// Permit knob values off the benchmark grid.
    pub allow_custom_knobs: bool,
    pub n_runs: usize,
    pub k_list: Vec<f64>,
    pub models: Vec<LearnerKind>,
    pub base_family: BaseFamily,
    /// Random-search trials per meta-learner.
    pub trials: usize,
    /// Grid points tried per network learner.
    pub net_trials: usize,
    pub net_max_epochs: usize,
    pub net_patience: usize,
    pub search_space: SearchSpace,
    pub master_seed: u64,
    pub resplit_per_run: bool,
    /// Share DGP draws across the knob values of a setting, so that knob
    /// comparisons differ only in the knob itself.
    pub common_random_numbers: bool,
    pub subsample_n: Option<usize>,
    pub oracle_tuning: bool,
    /// Validation fraction at which the default tuning objective is scored.
    pub tuning_k: f64,
    /// Add a model that predicts the true effect.
    pub include_oracle: bool,
    pub clip_eps: f64,
    /// 0 uses the analytic diagonal Qini baseline.
    pub qini_permutations: usize,
    pub covariates_path: Option<PathBuf>,
    pub mapping_path: Option<PathBuf>,
    /// Shape of the synthetic covariates used when no file is given.
    pub synthetic_n: usize,
    pub synthetic_d: usize,
    pub synthetic_discrete: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            settings: Setting::ALL.to_vec(),
            knobs: Default::default(),
            allow_custom_knobs: false,
            n_runs: 10,
            k_list: DEFAULT_K_LIST.to_vec(),
            models: LearnerKind::ALL.to_vec(),
            base_family: BaseFamily::Gbdt,
            trials: 20,
            net_trials: 8,
            net_max_epochs: crate::base::nn::DEFAULT_MAX_EPOCHS,
            net_patience: crate::base::nn::DEFAULT_PATIENCE,
            search_space: SearchSpace::default(),
            master_seed: 0,
            resplit_per_run: true,
            common_random_numbers: true,
            subsample_n: None,
            oracle_tuning: false,
            tuning_k: 0.3,
            include_oracle: false,
            clip_eps: DEFAULT_CLIP_EPS,
            qini_permutations: 0,
            covariates_path: None,
            mapping_path: None,
            synthetic_n: 64000,
            synthetic_d: 8,
            synthetic_discrete: 7,
        }
    }
}

fn same_knob(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| e.with_context(format!("reading {}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn knobs_for(&self, s: Setting) -> Vec<f64> {
        self.knobs.get(s.tag()).cloned().unwrap_or_else(|| s.default_knobs().to_vec())
    }

    /// All (setting, knob) cells in sweep order.
    pub fn cells(&self) -> Vec<Cell> {
        self.settings
            .iter()
            .flat_map(|&setting| self.knobs_for(setting).into_iter().map(move |knob| Cell { setting, knob }))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        if self.settings.is_empty() || self.models.is_empty() {
            return bad("settings and models must be non-empty".into());
        }
        if self.k_list.is_empty() || self.k_list.iter().any(|k| !(*k > 0.0 && *k <= 1.0)) {
            return bad("k_list values must lie in (0, 1]".into());
        }
        if !(self.tuning_k > 0.0 && self.tuning_k <= 1.0) {
            return bad("tuning_k must lie in (0, 1]".into());
        }
        if self.trials == 0 || self.net_trials == 0 {
            return bad("tuning budgets must be at least 1".into());
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 0.5) {
            return bad("clip_eps must lie in (0, 0.5)".into());
        }
        for key in self.knobs.keys() {
            if Setting::parse(key).is_none() {
                return bad(format!("unknown setting '{key}' in knobs"));
            }
        }
        if !self.allow_custom_knobs {
            for s in &self.settings {
                let grid = s.default_knobs();
                for k in self.knobs_for(*s) {
                    if !grid.iter().any(|g| same_knob(*g, k)) {
                        return bad(format!("knob {k} is not on the grid {grid:?} of setting {s}; set allow_custom_knobs to override"));
                    }
                }
            }
        }
        if let Some(n) = self.subsample_n {
            if n < 10 {
                return bad("subsample_n must be at least 10".into());
            }
        }
        if self.covariates_path.is_none() && (self.synthetic_n < 10 || self.synthetic_d == 0 || self.synthetic_discrete > self.synthetic_d) {
            return bad("synthetic covariate shape is invalid".into());
        }
        self.search_space.validate().map_err(|e| Error::Config(e.to_string()))
    }

    fn net_template(&self) -> NetConfig {
        NetConfig {
            max_epochs: self.net_max_epochs,
            patience: self.net_patience,
            ..NetConfig::default()
        }
    }

    fn knob_label(&self, knob: f64) -> String {
        if self.common_random_numbers {
            String::new()
        } else {
            knob.to_string()
        }
    }

    /// Seeds of the generator for one cell.
    pub fn dgp_seeds(&self, cell: Cell) -> DgpSeeds {
        DgpSeeds::from_base(derive_seed(self.master_seed, &[cell.setting.tag(), &self.knob_label(cell.knob), "dataset"]))
    }

    pub fn split_seed(&self, cell: Cell, run: usize) -> u64 {
        let run = if self.resplit_per_run { run.to_string() } else { "0".into() };
        derive_seed(self.master_seed, &[cell.setting.tag(), &self.knob_label(cell.knob), "split", &run])
    }

    pub fn model_seed(&self, cell: Cell, model: LearnerKind, run: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[cell.setting.tag(), &self.knob_label(cell.knob), "model", model.name(), &run.to_string()],
        )
    }

    fn qini_baseline(&self, cell: Cell, run: usize) -> QiniBaseline {
        if self.qini_permutations == 0 {
            QiniBaseline::Diagonal
        } else {
            QiniBaseline::Permutations {
                count: self.qini_permutations,
                seed: derive_seed(self.master_seed, &[cell.setting.tag(), &cell.knob.to_string(), "qini", &run.to_string()]),
            }
        }
    }
}

/// Covariates for the sweep: loaded or synthesized, then subsampled.
pub fn prepare_covariates(cfg: &ExperimentConfig) -> Result<CovariateMatrix> {
    let x = match &cfg.covariates_path {
        Some(p) => {
            let mapping = match &cfg.mapping_path {
                Some(m) => Some(ColumnMapping::from_toml_file(m)?),
                None => None,
            };
            data::load_covariates(p, mapping.as_ref())?
        }
        None => data::synthesize_covariates(
            cfg.synthetic_n,
            cfg.synthetic_d,
            cfg.synthetic_discrete,
            derive_seed(cfg.master_seed, &["covariates"]),
        )?,
    };
    Ok(match cfg.subsample_n {
        Some(n) => x.subsample(n, derive_seed(cfg.master_seed, &["subsample"])),
        None => x,
    })
}

pub fn generate_cell(x: &CovariateMatrix, cfg: &ExperimentConfig, cell: Cell) -> Result<SemiSyntheticDataset> {
    let dgp_cfg = DgpConfig::for_setting(cell.setting, cell.knob, cfg.dgp_seeds(cell));
    dgp::generate(x, &dgp_cfg).map_err(|e| e.with_context(format!("generating cell {}", cell.label())))
}

/// Metric rows for one model's test-set predictions at every k.
pub fn score_rows(cfg: &ExperimentConfig, cell: Cell, run: usize, model: &str, tau_hat: &[f64], test: &Sample) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &k in &cfg.k_list {
        let rep = evaluate(tau_hat, test.tau.as_deref(), &test.t, &test.y, k, cfg.qini_baseline(cell, run))?;
        for metric in MetricKind::ALL {
            let value = rep
                .get(metric)
                .ok_or_else(|| Error::Argument(format!("{} needs true effects on the test split", metric.name())))?;
            rows.push(ResultRow {
                setting: cell.setting,
                knob: cell.knob,
                model: model.to_string(),
                run,
                k,
                metric,
                value,
            });
        }
    }
    Ok(rows)
}

/// One run of one cell: split, tune and score every configured model.
pub fn run_cell(ds: &SemiSyntheticDataset, cfg: &ExperimentConfig, cell: Cell, run: usize) -> Result<Vec<ResultRow>> {
    let ctx = |model: &str| format!("setting {}, knob {}, run {run}, model {model}", cell.setting, cell.knob);
    let full = ds.sample();
    let sp = data::split(full.len(), DEFAULT_SPLIT_RATIOS, cfg.split_seed(cell, run))?;
    let (train, val, test) = (full.select(&sp.train), full.select(&sp.val), full.select(&sp.test));
    let objective = if cfg.oracle_tuning {
        TuningObjective::OraclePehe
    } else {
        TuningObjective::Uplift { k: cfg.tuning_k }
    };
    let mut rows = Vec::new();
    for &kind in &cfg.models {
        let seed = cfg.model_seed(cell, kind, run);
        let budget = if kind.is_network() { cfg.net_trials } else { cfg.trials };
        let outcome = cfg
            .search_space
            .candidates(kind, cfg.base_family, &cfg.net_template(), cfg.clip_eps, budget, seed)
            .and_then(|c| tune(c, &train, &val, objective, seed))
            .map_err(|e| e.with_context(ctx(kind.name())))?;
        let tau_hat = outcome.model.predict_tau(test.x.view()).map_err(|e| e.with_context(ctx(kind.name())))?;
        log::debug!("{}: {} best validation score {}", ctx(kind.name()), kind, outcome.score);
        rows.extend(score_rows(cfg, cell, run, kind.name(), &tau_hat, &test)?);
    }
    if cfg.include_oracle {
        let tau = test.tau.clone().ok_or_else(|| Error::Argument("oracle model needs true effects".into()))?;
        rows.extend(score_rows(cfg, cell, run, ORACLE_MODEL, &tau, &test)?);
    }
    Ok(rows)
}

/// The whole sweep, in deterministic order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let x = prepare_covariates(cfg)?;
    let mut rows = Vec::new();
    for cell in cfg.cells() {
        let ds = generate_cell(&x, cfg, cell)?;
        for run in 0..cfg.n_runs {
            log::info!("cell {} run {}/{}", cell.label(), run + 1, cfg.n_runs);
            rows.extend(run_cell(&ds, cfg, cell, run)?);
        }
    }
    Ok(ResultsTable { rows })
}

/// Run a sweep and write `rows.csv`, `config.toml` and the CSV report into `dir`.
pub fn run_bench(cfg: &ExperimentConfig, dir: &Path) -> Result<ResultsTable> {
    let table = run_experiment(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string()?).map_err(|e| Error::io(&cfg_path, e))?;
    table.write_csv(&dir.join("rows.csv"))?;
    emit_report(&table, ReportFormat::Csv, dir)?;
    Ok(table)
}

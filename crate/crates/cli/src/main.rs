//! `uplift-bench`: generate datasets, run sweeps, score predictions and
//! build report tables.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 training error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uplift_core::dgp::{read_dataset, write_dataset};
use uplift_core::harness::{self, emit_report, Cell, ExperimentConfig, ReportFormat, ResultsTable, Setting};
use uplift_core::metrics::{evaluate, QiniBaseline};
use uplift_core::Error;

#[derive(Parser)]
#[command(name = "uplift-bench", version, about = "Semi-synthetic uplift modeling benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one semi-synthetic dataset.
    Generate {
        /// Bias family: A (selection), B (spillover), C (measurement), D (confounding).
        #[arg(long)]
        setting: String,
        #[arg(long)]
        knob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Covariate CSV; synthetic covariates are used when omitted.
        #[arg(long)]
        covariates: Option<PathBuf>,
        /// TOML column mapping for the covariate CSV.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        subsample_n: Option<usize>,
        /// Number of synthetic units when no covariate file is given.
        #[arg(long, default_value_t = 64000)]
        synthetic_n: usize,
        /// Accept a knob value that is not on the benchmark grid.
        #[arg(long)]
        allow_custom_knob: bool,
    },
    /// Run a full sweep from a TOML config and write results into a directory.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        subsample_n: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Score predicted effects against a generated dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// CSV with a `tau_hat` column (and optionally `id`).
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        k: f64,
    },
    /// Build report tables from the `rows.csv` of a bench run.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Output directory; defaults to the results directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 1,
        _ if e.is_training() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Generate {
            setting,
            knob,
            seed,
            out,
            covariates,
            mapping,
            subsample_n,
            synthetic_n,
            allow_custom_knob,
        } => {
            let setting = Setting::parse(&setting).ok_or_else(|| Failure::Usage(format!("unknown setting '{setting}' (expected A, B, C or D)")))?;
            let mut cfg = ExperimentConfig {
                settings: vec![setting],
                master_seed: seed,
                covariates_path: covariates,
                mapping_path: mapping,
                subsample_n,
                synthetic_n,
                allow_custom_knobs: allow_custom_knob,
                ..Default::default()
            };
            cfg.knobs.insert(setting.tag().to_string(), vec![knob]);
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let x = harness::prepare_covariates(&cfg)?;
            let ds = harness::generate_cell(&x, &cfg, Cell { setting, knob })?;
            write_dataset(&ds, &out)?;
            println!("wrote {} units to {}", ds.n(), out.display());
            Ok(())
        }
        Command::Bench {
            config,
            out,
            subsample_n,
            runs,
        } => {
            let mut cfg = ExperimentConfig::from_toml_file(&config)?;
            if subsample_n.is_some() {
                cfg.subsample_n = subsample_n;
            }
            if let Some(r) = runs {
                cfg.n_runs = r;
            }
            cfg.validate()?;
            let table = harness::run_bench(&cfg, &out)?;
            println!("wrote {} result rows to {}", table.rows.len(), out.display());
            Ok(())
        }
        Command::Evaluate { dataset, predictions, k } => {
            if !(k > 0.0 && k <= 1.0) {
                return Err(Failure::Usage(format!("k must lie in (0, 1], got {k}")));
            }
            let table = read_dataset(&dataset)?;
            let tau_hat = read_predictions(&predictions, &table.ids)?;
            let rep = evaluate(&tau_hat, Some(&table.tau), &table.t, &table.y, k, QiniBaseline::Diagonal)?;
            println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
            Ok(())
        }
        Command::Report { results, format, out } => {
            let format = ReportFormat::parse(&format).map_err(|e| Failure::Usage(e.to_string()))?;
            let table = ResultsTable::read_csv(&results.join("rows.csv"))?;
            let files = emit_report(&table, format, out.as_deref().unwrap_or(&results))?;
            println!("wrote {} report files", files.len());
            Ok(())
        }
    }
}

/// Predictions in dataset order. With an `id` column, rows are matched to
/// dataset ids; otherwise they are taken positionally.
fn read_predictions(path: &Path, ids: &[usize]) -> Result<Vec<f64>, Error> {
    let parse_err = |row: usize, column: &str, message: String| Error::Parse {
        row,
        column: column.to_string(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(1, "", format!("{other:?}")),
    })?;
    let headers = rdr.headers().map_err(|e| parse_err(1, "", e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let tau_col = col("tau_hat").ok_or_else(|| parse_err(1, "tau_hat", "missing column".into()))?;
    let id_col = col("id");
    let mut by_pos = Vec::new();
    let mut by_id = std::collections::HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_err(row, "", e.to_string()))?;
        let v: f64 = rec[tau_col].trim().parse().map_err(|_| parse_err(row, "tau_hat", format!("not a number: '{}'", &rec[tau_col])))?;
        if !v.is_finite() {
            return Err(parse_err(row, "tau_hat", "non-finite value".into()));
        }
        match id_col {
            Some(c) => {
                let id: usize = rec[c].trim().parse().map_err(|_| parse_err(row, "id", format!("not an id: '{}'", &rec[c])))?;
                by_id.insert(id, v);
            }
            None => by_pos.push(v),
        }
    }
    if id_col.is_some() {
        ids.iter()
            .map(|id| by_id.get(id).copied().ok_or_else(|| Error::Argument(format!("no prediction for id {id}"))))
            .collect()
    } else if by_pos.len() != ids.len() {
        Err(Error::Argument(format!("{} predictions for {} units", by_pos.len(), ids.len())))
    } else {
        Ok(by_pos)
    }
}

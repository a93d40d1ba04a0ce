//! Semi-synthetic uplift modeling benchmark.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: covariate ingestion, min-max scaling and train/val/test splits.
//! - [`dgp`]: the semi-synthetic data-generating process with four bias knobs
//!   (selection bias, spillover, measurement error, unobserved confounding).
//! - [`base`]: ridge, logistic, gradient-boosted trees and the dense network
//!   primitive that the uplift learners are assembled from.
//! - [`learners`]: nine CATE estimators behind one fit/predict interface.
//! - [`metrics`]: PEHE/ATE oracle metrics, Uplift/AUUC/Qini practical metrics
//!   and Spearman rank correlation.
//! - [`harness`]: the experiment sweep, tuning, aggregation and report output.

pub mod base;
pub mod data;
pub mod dgp;
pub mod error;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod rng;

pub use data::{ColumnKind, ColumnMapping, CovariateMatrix, SplitIndices};
pub use dgp::{CoefficientSet, DgpConfig, NeighborIndex, SemiSyntheticDataset};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ResultsTable, Setting};
pub use learners::{LearnerKind, UpliftModel};
pub use metrics::{MetricKind, MetricReport, RankedPopulation};

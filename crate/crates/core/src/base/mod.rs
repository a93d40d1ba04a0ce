//! Base regression and classification models.
//!
//! Uplift learners are written against two small traits: [`RegressorSpec`]
//! fits a [`Regressor`] and [`PropensitySpec`] fits a [`ProbabilityModel`].
//! The concrete families are ridge regression, L2-penalized logistic
//! regression, gradient-boosted regression trees and a dense ReLU network.

pub mod gbdt;
pub mod logistic;
pub mod nn;
pub mod ridge;

use std::fmt::Debug;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use gbdt::{fit_gbdt, GbdtModel, GbtConfig};
pub use logistic::{fit_logistic, LogisticModel};
pub use nn::{fit_mlp, MlpConfig, MlpModel};
pub use ridge::{fit_ridge, RidgeModel};

/// A fitted real-valued regression function.
pub trait Regressor: Send + Sync + Debug {
    fn n_features(&self) -> usize;
    fn predict(&self, x: ArrayView2<f64>) -> Vec<f64>;
}

/// Something that can fit a [`Regressor`] to (optionally weighted) data.
pub trait RegressorSpec: Send + Sync + Debug {
    fn fit(&self, x: ArrayView2<f64>, y: &[f64], weights: Option<&[f64]>, seed: u64) -> Result<Box<dyn Regressor>>;

    /// True when fitted models are affine in their inputs.
    fn is_linear(&self) -> bool {
        false
    }
}

/// A fitted P(T = 1 | x).
pub trait ProbabilityModel: Send + Sync + Debug {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64>;
}

pub trait PropensitySpec: Send + Sync + Debug {
    fn fit(&self, x: ArrayView2<f64>, t: &[f64]) -> Result<Box<dyn ProbabilityModel>>;
}

/// Configured regression family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseLearner {
    Ridge { lambda: f64 },
    Gbdt(GbtConfig),
    Mlp(MlpConfig),
}

impl RegressorSpec for BaseLearner {
    fn fit(&self, x: ArrayView2<f64>, y: &[f64], weights: Option<&[f64]>, seed: u64) -> Result<Box<dyn Regressor>> {
        Ok(match self {
            BaseLearner::Ridge { lambda } => Box::new(fit_ridge(x, y, weights, *lambda)?),
            BaseLearner::Gbdt(c) => Box::new(fit_gbdt(x, y, weights, c, seed)?),
            BaseLearner::Mlp(c) => {
                let mut c = c.clone();
                c.seed = seed;
                Box::new(nn::fit_mlp_auto_holdout(x, y, weights, &c)?)
            }
        })
    }

    fn is_linear(&self) -> bool {
        matches!(self, BaseLearner::Ridge { .. })
    }
}

/// Configured propensity family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropensityLearner {
    Logistic { c: f64 },
    /// A known assignment probability, as in a randomized trial.
    Constant { p: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantProbability(pub f64);

impl ProbabilityModel for ConstantProbability {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        vec![self.0; x.nrows()]
    }
}

impl PropensitySpec for PropensityLearner {
    fn fit(&self, x: ArrayView2<f64>, t: &[f64]) -> Result<Box<dyn ProbabilityModel>> {
        match *self {
            PropensityLearner::Logistic { c } => Ok(Box::new(fit_logistic(x, t, c)?)),
            PropensityLearner::Constant { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return crate::error::arg(format!("constant propensity must lie in (0, 1), got {p}"));
                }
                Ok(Box::new(ConstantProbability(p)))
            }
        }
    }
}

pub(crate) fn check_weights(n: usize, weights: Option<&[f64]>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != n {
            return crate::error::arg("weight vector length does not match rows");
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return crate::error::arg("weights must be finite and non-negative");
        }
    }
    Ok(())
}

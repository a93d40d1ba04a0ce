//! Hyperparameter search spaces and the seeded tuner.
//!
//! Continuous ranges are searched by seeded random sampling; the finite
//! network grids are enumerated exhaustively when the budget covers them and
//! sampled without replacement otherwise.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::base::{BaseLearner, GbtConfig, PropensityLearner};
use crate::data::Sample;
use crate::error::{arg, Error, Result};
use crate::learners::{fit_learner, LearnerConfig, LearnerKind, NetConfig, UpliftModel};
use crate::metrics::{evaluate, QiniBaseline};
use crate::rng::{self, derive_seed};

/// Regression family used inside the meta-learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    #[default]
    Gbdt,
    Ridge,
}

/// Search ranges for every tunable hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub logistic_c: (f64, f64),
    pub n_estimators: (usize, usize),
    pub max_depth: (usize, usize),
    pub learning_rate: (f64, f64),
    pub subsample: (f64, f64),
    pub colsample_bytree: (f64, f64),
    pub reg_alpha: (f64, f64),
    pub reg_lambda: (f64, f64),
    /// Only used with the ridge family.
    pub ridge_lambda: (f64, f64),
    pub tarnet_hidden: Vec<usize>,
    pub tarnet_outcome: Vec<usize>,
    pub dragonnet_hidden: Vec<usize>,
    pub dragonnet_outcome: Vec<usize>,
    pub net_learning_rate: Vec<f64>,
    pub net_batch_size: Vec<usize>,
    pub dragonnet_alpha: Vec<f64>,
    pub dragonnet_beta: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            logistic_c: (0.01, 10.0),
            n_estimators: (3, 10),
            max_depth: (3, 10),
            learning_rate: (0.01, 0.3),
            subsample: (0.6, 1.0),
            colsample_bytree: (0.6, 1.0),
            reg_alpha: (0.0, 1.0),
            reg_lambda: (0.0, 1.0),
            ridge_lambda: (1e-4, 10.0),
            tarnet_hidden: vec![50, 100, 200],
            tarnet_outcome: vec![100, 200],
            dragonnet_hidden: vec![100, 200],
            dragonnet_outcome: vec![100, 200],
            net_learning_rate: vec![1e-2, 1e-3],
            net_batch_size: vec![200, 500],
            dragonnet_alpha: vec![0.1, 0.5, 1.0, 2.0],
            dragonnet_beta: vec![0.1, 0.5, 1.0, 2.0],
        }
    }
}

fn log_uniform(r: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    (r.random_range(lo.ln()..=hi.ln())).exp().clamp(lo, hi)
}

fn uniform(r: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        r.random_range(lo..=hi)
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("logistic_c", self.logistic_c),
            ("learning_rate", self.learning_rate),
            ("subsample", self.subsample),
            ("colsample_bytree", self.colsample_bytree),
            ("reg_alpha", self.reg_alpha),
            ("reg_lambda", self.reg_lambda),
            ("ridge_lambda", self.ridge_lambda),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo <= hi && lo >= 0.0 && hi.is_finite()) {
                return arg(format!("search space: bad range for {name}: ({lo}, {hi})"));
            }
        }
        if self.logistic_c.0 <= 0.0 || self.ridge_lambda.0 <= 0.0 {
            return arg("search space: logistic_c and ridge_lambda must be positive");
        }
        if self.n_estimators.0 == 0 || self.n_estimators.0 > self.n_estimators.1 || self.max_depth.0 == 0 || self.max_depth.0 > self.max_depth.1 {
            return arg("search space: bad integer range for trees");
        }
        let grids = [
            self.tarnet_hidden.is_empty(),
            self.tarnet_outcome.is_empty(),
            self.dragonnet_hidden.is_empty(),
            self.dragonnet_outcome.is_empty(),
            self.net_learning_rate.is_empty(),
            self.net_batch_size.is_empty(),
            self.dragonnet_alpha.is_empty(),
            self.dragonnet_beta.is_empty(),
        ];
        if grids.iter().any(|e| *e) {
            return arg("search space: network grids must be non-empty");
        }
        Ok(())
    }

    fn sample_gbt(&self, r: &mut impl Rng) -> GbtConfig {
        GbtConfig {
            n_estimators: r.random_range(self.n_estimators.0..=self.n_estimators.1),
            max_depth: r.random_range(self.max_depth.0..=self.max_depth.1),
            learning_rate: uniform(r, self.learning_rate),
            subsample: uniform(r, self.subsample),
            colsample_bytree: uniform(r, self.colsample_bytree),
            reg_alpha: uniform(r, self.reg_alpha),
            reg_lambda: uniform(r, self.reg_lambda),
            min_child_weight: 0.0,
        }
    }

    /// Every point of a network grid, in a fixed enumeration order.
    pub fn network_grid(&self, kind: LearnerKind, template: &NetConfig) -> Vec<NetConfig> {
        let dragon = kind == LearnerKind::Dragonnet;
        let (hidden, outcome) = if dragon {
            (&self.dragonnet_hidden, &self.dragonnet_outcome)
        } else {
            (&self.tarnet_hidden, &self.tarnet_outcome)
        };
        let (alphas, betas) = if dragon {
            (self.dragonnet_alpha.clone(), self.dragonnet_beta.clone())
        } else {
            (vec![0.0], vec![0.0])
        };
        let mut out = Vec::new();
        for &alpha in &alphas {
            for &beta in &betas {
                for &h in hidden {
                    for &o in outcome {
                        for &lr in &self.net_learning_rate {
                            for &b in &self.net_batch_size {
                                out.push(NetConfig {
                                    hidden_width: h,
                                    outcome_width: o,
                                    learning_rate: lr,
                                    batch_size: b,
                                    alpha,
                                    beta,
                                    ..template.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `budget` candidate configurations for a learner.
    pub fn candidates(
        &self,
        kind: LearnerKind,
        family: BaseFamily,
        net_template: &NetConfig,
        clip_eps: f64,
        budget: usize,
        seed: u64,
    ) -> Result<Vec<LearnerConfig>> {
        if budget == 0 {
            return arg("tuning budget must be at least 1");
        }
        let mut r = rng::stream(seed, "search");
        let mut out = Vec::with_capacity(budget);
        if kind.is_network() {
            let grid = self.network_grid(kind, net_template);
            let picks: Vec<usize> = if budget >= grid.len() {
                (0..grid.len()).collect()
            } else {
                sample(&mut r, grid.len(), budget).into_vec()
            };
            for i in picks {
                let mut c = LearnerConfig::new(kind);
                c.net = grid[i].clone();
                c.clip_eps = clip_eps;
                out.push(c);
            }
        } else {
            for _ in 0..budget {
                let mut c = LearnerConfig::new(kind);
                c.base = match family {
                    BaseFamily::Gbdt => BaseLearner::Gbdt(self.sample_gbt(&mut r)),
                    BaseFamily::Ridge => BaseLearner::Ridge {
                        lambda: log_uniform(&mut r, self.ridge_lambda),
                    },
                };
                c.propensity = PropensityLearner::Logistic {
                    c: log_uniform(&mut r, self.logistic_c),
                };
                c.clip_eps = clip_eps;
                out.push(c);
            }
        }
        Ok(out)
    }
}

/// What the tuner optimizes on the validation split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TuningObjective {
    /// Maximize Uplift at the given fraction (needs only factual data).
    Uplift { k: f64 },
    /// Minimize PEHE over all validation units (needs true effects).
    OraclePehe,
}

impl TuningObjective {
    /// Score to be maximized.
    pub fn score(&self, tau_hat: &[f64], val: &Sample) -> Result<f64> {
        match *self {
            TuningObjective::Uplift { k } => Ok(evaluate(tau_hat, None, &val.t, &val.y, k, QiniBaseline::Diagonal)?.uplift),
            TuningObjective::OraclePehe => {
                let tau = val
                    .tau
                    .as_ref()
                    .ok_or_else(|| Error::Argument("oracle tuning needs true effects on the validation split".into()))?;
                let mse = tau_hat.iter().zip(tau).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / tau.len() as f64;
                Ok(-mse.sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub config: LearnerConfig,
    /// Validation score (higher is better), or the failure message.
    pub outcome: std::result::Result<f64, String>,
}

pub struct TuneOutcome {
    pub best: LearnerConfig,
    pub model: UpliftModel,
    pub score: f64,
    pub trials: Vec<TrialRecord>,
}

/// Fit each candidate on `train`, score on `val`, keep the best. Ties keep
/// the earliest candidate.
pub fn tune(
    candidates: Vec<LearnerConfig>,
    train: &Sample,
    val: &Sample,
    objective: TuningObjective,
    seed: u64,
) -> Result<TuneOutcome> {
    let Some(first) = candidates.first() else {
        return arg("tuning budget must be at least 1");
    };
    let kind = first.kind;
    let mut best: Option<(f64, LearnerConfig, UpliftModel)> = None;
    let mut trials = Vec::with_capacity(candidates.len());
    for (i, cfg) in candidates.into_iter().enumerate() {
        let fit_seed = derive_seed(seed, &["trial", &i.to_string()]);
        let result = fit_learner(&cfg, train, Some(val), fit_seed)
            .and_then(|m| m.predict_tau(val.x.view()).map(|p| (m, p)))
            .and_then(|(m, p)| objective.score(&p, val).map(|s| (m, s)));
        match result {
            Ok((model, score)) if score.is_finite() => {
                trials.push(TrialRecord {
                    config: cfg.clone(),
                    outcome: Ok(score),
                });
                if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
                    best = Some((score, cfg, model));
                }
            }
            Ok((_, score)) => trials.push(TrialRecord {
                config: cfg,
                outcome: Err(format!("non-finite validation score {score}")),
            }),
            Err(e) => {
                log::debug!("{kind} trial {i} failed: {e}");
                trials.push(TrialRecord {
                    config: cfg,
                    outcome: Err(e.to_string()),
                });
            }
        }
    }
    match best {
        Some((score, best, model)) => Ok(TuneOutcome {
            best,
            model,
            score,
            trials,
        }),
        None => Err(Error::Tuning {
            model: kind.to_string(),
            failures: trials.into_iter().filter_map(|t| t.outcome.err()).collect(),
        }),
    }
}

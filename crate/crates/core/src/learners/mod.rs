//! Uplift (CATE) learners behind a single fit/predict interface.
//!
//! Seven meta-learners (S, T, X, R, U, DR, RA) are built from the base
//! models in [`crate::base`]; TARNet and Dragonnet are two-headed networks.
//! Every learner is fitted with [`fit_learner`] and evaluated with
//! [`UpliftModel::predict_tau`].

pub mod meta;
pub mod net;

use std::fmt;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::base::{BaseLearner, GbtConfig, ProbabilityModel, PropensityLearner, Regressor};
use crate::data::Sample;
use crate::error::{arg, Error, Result};

pub use meta::{
    dr_pseudo_outcomes, fit_dr_learner, fit_r_learner, fit_ra_learner, fit_s_learner, fit_t_learner, fit_u_learner,
    fit_x_learner, r_learner_targets, ra_pseudo_outcomes, u_learner_targets, x_blend,
};
pub use net::{fit_two_head, NetConfig, TwoHeadNet};

/// Bound on propensities (DR) and treatment residuals (U, R) in denominators.
pub const DEFAULT_CLIP_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LearnerKind {
    S,
    T,
    X,
    R,
    U,
    DR,
    RA,
    TARNet,
    Dragonnet,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 9] = [
        LearnerKind::S,
        LearnerKind::T,
        LearnerKind::X,
        LearnerKind::R,
        LearnerKind::U,
        LearnerKind::DR,
        LearnerKind::RA,
        LearnerKind::TARNet,
        LearnerKind::Dragonnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::S => "S",
            LearnerKind::T => "T",
            LearnerKind::X => "X",
            LearnerKind::R => "R",
            LearnerKind::U => "U",
            LearnerKind::DR => "DR",
            LearnerKind::RA => "RA",
            LearnerKind::TARNet => "TARNet",
            LearnerKind::Dragonnet => "Dragonnet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown learner '{s}'")))
    }

    pub fn is_network(self) -> bool {
        matches!(self, LearnerKind::TARNet | LearnerKind::Dragonnet)
    }

    pub fn uses_propensity(self) -> bool {
        matches!(self, LearnerKind::X | LearnerKind::R | LearnerKind::U | LearnerKind::DR)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full configuration of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub base: BaseLearner,
    pub propensity: PropensityLearner,
    pub net: NetConfig,
    pub clip_eps: f64,
}

impl LearnerConfig {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerConfig {
            kind,
            base: BaseLearner::Gbdt(GbtConfig::default()),
            propensity: PropensityLearner::Logistic { c: 1.0 },
            net: NetConfig::default(),
            clip_eps: DEFAULT_CLIP_EPS,
        }
    }
}

#[derive(Debug)]
pub(crate) enum Components {
    S {
        mu: Box<dyn Regressor>,
        interactions: bool,
    },
    T {
        mu0: Box<dyn Regressor>,
        mu1: Box<dyn Regressor>,
    },
    X {
        tau0: Box<dyn Regressor>,
        tau1: Box<dyn Regressor>,
        pi: Box<dyn ProbabilityModel>,
    },
    /// R, U, DR and RA end in a single effect regression.
    Effect(Box<dyn Regressor>),
    Net(TwoHeadNet),
}

/// A fitted uplift model.
#[derive(Debug)]
pub struct UpliftModel {
    kind: LearnerKind,
    n_features: usize,
    components: Components,
}

impl UpliftModel {
    pub(crate) fn new(kind: LearnerKind, n_features: usize, components: Components) -> Self {
        UpliftModel {
            kind,
            n_features,
            components,
        }
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// The trained network, for TARNet and Dragonnet.
    pub fn network(&self) -> Option<&TwoHeadNet> {
        match &self.components {
            Components::Net(n) => Some(n),
            _ => None,
        }
    }

    pub fn predict_tau(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return arg(format!(
                "{} learner was fitted on {} features, got {}",
                self.kind,
                self.n_features,
                x.ncols()
            ));
        }
        let tau = match &self.components {
            Components::S { mu, interactions } => meta::predict_s(mu.as_ref(), x, *interactions),
            Components::T { mu0, mu1 } => mu1.predict(x).iter().zip(mu0.predict(x)).map(|(a, b)| a - b).collect(),
            Components::X { tau0, tau1, pi } => meta::predict_x(tau0.as_ref(), tau1.as_ref(), pi.as_ref(), x),
            Components::Effect(tau) => tau.predict(x),
            Components::Net(net) => net.predict_tau(x),
        };
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("{} learner produced a non-finite effect", self.kind)));
        }
        Ok(tau)
    }
}

/// Fit any learner on a training sample. Networks use `val` for early
/// stopping; meta-learners ignore it.
pub fn fit_learner(cfg: &LearnerConfig, train: &Sample, val: Option<&Sample>, seed: u64) -> Result<UpliftModel> {
    let (x, t, y) = (train.x.view(), &train.t[..], &train.y[..]);
    let base = &cfg.base;
    let prop = &cfg.propensity;
    match cfg.kind {
        LearnerKind::S => fit_s_learner(x, t, y, base, seed),
        LearnerKind::T => fit_t_learner(x, t, y, base, seed),
        LearnerKind::X => fit_x_learner(x, t, y, base, prop, seed),
        LearnerKind::R => fit_r_learner(x, t, y, base, prop, cfg.clip_eps, seed),
        LearnerKind::U => fit_u_learner(x, t, y, base, prop, cfg.clip_eps, seed),
        LearnerKind::DR => fit_dr_learner(x, t, y, base, prop, cfg.clip_eps, seed),
        LearnerKind::RA => fit_ra_learner(x, t, y, base, seed),
        LearnerKind::TARNet | LearnerKind::Dragonnet => {
            meta::arms(t)?;
            let v = val.map(|s| (s.x.view(), &s.t[..], &s.y[..]));
            let net = fit_two_head(x, t, y, &cfg.net, cfg.kind == LearnerKind::Dragonnet, v, seed)?;
            Ok(UpliftModel::new(cfg.kind, x.ncols(), Components::Net(net)))
        }
    }
}

//! Two-headed representation networks (TARNet and Dragonnet).
//!
//! A shared trunk Φ feeds two outcome heads; each unit's prediction is
//! gated by its treatment so that only the factual head receives gradient.
//! Dragonnet adds a propensity head g(Φ) trained with cross-entropy and a
//! targeted-regularization term with a learnable scalar ε.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::base::nn::{train, DenseLayout, Objective, TrainConfig, TrainHistory, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE};
use crate::dgp::sigmoid;
use crate::error::{arg, Result};

/// Bounds applied to g inside the inverse-propensity weights.
pub const G_CLIP: (f64, f64) = (0.01, 0.99);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    /// Width of each trunk layer.
    pub hidden_width: usize,
    /// Number of trunk layers; 0 makes Φ the identity.
    pub trunk_layers: usize,
    /// Width of the hidden layer in each head; 0 makes heads linear.
    pub outcome_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Cross-entropy weight (Dragonnet only).
    pub alpha: f64,
    /// Targeted-regularization weight (Dragonnet only).
    pub beta: f64,
    /// Start both outcome heads from the same weights.
    pub shared_head_init: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden_width: 100,
            trunk_layers: 2,
            outcome_width: 100,
            learning_rate: 1e-3,
            batch_size: 200,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            alpha: 1.0,
            beta: 1.0,
            shared_head_init: false,
        }
    }
}

impl NetConfig {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoHeadNet {
    pub trunk: DenseLayout,
    pub head0: DenseLayout,
    pub head1: DenseLayout,
    /// Present for Dragonnet.
    pub prop_head: Option<DenseLayout>,
    pub alpha: f64,
    pub beta: f64,
    pub params: Vec<f64>,
    pub history: TrainHistory,
}

/// Heads evaluated on a matrix of inputs.
pub struct HeadOutputs {
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    pub g: Option<Vec<f64>>,
}

impl TwoHeadNet {
    /// An initialized, untrained network.
    pub fn new(d: usize, cfg: &NetConfig, dragonnet: bool, seed: u64) -> Result<Self> {
        if dragonnet && !(cfg.alpha >= 0.0 && cfg.beta >= 0.0) {
            return arg("dragonnet: alpha and beta must be non-negative");
        }
        if cfg.trunk_layers > 0 && cfg.hidden_width == 0 {
            return arg("network: hidden_width must be positive");
        }
        let mut dims = vec![d];
        dims.extend(std::iter::repeat_n(cfg.hidden_width, cfg.trunk_layers));
        let trunk = DenseLayout::new(dims, 0, true);
        let rep = trunk.output_dim();
        let head_dims = |_: ()| {
            if cfg.outcome_width == 0 {
                vec![rep, 1]
            } else {
                vec![rep, cfg.outcome_width, 1]
            }
        };
        let head0 = DenseLayout::new(head_dims(()), trunk.end(), false);
        let head1 = DenseLayout::new(head_dims(()), head0.end(), false);
        let (prop_head, n_params) = if dragonnet {
            let p = DenseLayout::new(vec![rep, 1], head1.end(), false);
            let end = p.end() + 1;
            (Some(p), end)
        } else {
            (None, head1.end())
        };
        let mut params = vec![0.0; n_params];
        let mut rng = crate::rng::stream(seed, "init");
        trunk.init(&mut params, &mut rng);
        head0.init(&mut params, &mut rng);
        head1.init(&mut params, &mut rng);
        if cfg.shared_head_init {
            let (a, b) = (head0.offset, head1.offset);
            let len = head0.n_params();
            params.copy_within(a..a + len, b);
        }
        if let Some(p) = &prop_head {
            p.init(&mut params, &mut crate::rng::stream(seed, "init-propensity"));
        }
        Ok(TwoHeadNet {
            trunk,
            head0,
            head1,
            prop_head,
            alpha: if dragonnet { cfg.alpha } else { 0.0 },
            beta: if dragonnet { cfg.beta } else { 0.0 },
            params,
            history: TrainHistory::default(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.trunk.dims[0]
    }

    pub fn is_dragonnet(&self) -> bool {
        self.prop_head.is_some()
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.prop_head.as_ref().map(|_| *self.params.last().expect("epsilon"))
    }

    pub fn heads(&self, x: ArrayView2<f64>) -> HeadOutputs {
        self.heads_with(&self.params, x)
    }

    fn heads_with(&self, params: &[f64], x: ArrayView2<f64>) -> HeadOutputs {
        let ta = self.trunk.forward(params, x);
        let rep = ta.last().expect("trunk output").view();
        let out = |l: &DenseLayout| l.forward(params, rep).last().expect("head output").column(0).to_vec();
        HeadOutputs {
            q0: out(&self.head0),
            q1: out(&self.head1),
            g: self.prop_head.as_ref().map(|p| out(p).into_iter().map(sigmoid).collect()),
        }
    }

    pub fn predict_tau(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let h = self.heads(x);
        h.q1.iter().zip(&h.q0).map(|(a, b)| a - b).collect()
    }

    /// Joint loss on (x, t, y) at `params`; when `grads` is given the
    /// gradient is written into it.
    pub fn loss_and_grad(&self, params: &[f64], x: ArrayView2<f64>, t: &[f64], y: &[f64], grads: Option<&mut [f64]>) -> f64 {
        let n = y.len();
        let b = n as f64;
        let ta = self.trunk.forward(params, x);
        let rep = ta.last().expect("trunk output").view();
        let a0 = self.head0.forward(params, rep);
        let a1 = self.head1.forward(params, rep);
        let q0 = a0.last().expect("head output").column(0);
        let q1 = a1.last().expect("head output").column(0);
        let yhat: Vec<f64> = (0..n).map(|i| t[i] * q1[i] + (1.0 - t[i]) * q0[i]).collect();
        let mut dyhat: Vec<f64> = (0..n).map(|i| 2.0 * (yhat[i] - y[i]) / b).collect();
        let mut loss = (0..n).map(|i| (yhat[i] - y[i]).powi(2)).sum::<f64>() / b;

        let mut prop_state = None;
        if let Some(prop) = &self.prop_head {
            let ap = prop.forward(params, rep);
            let logits = ap.last().expect("propensity output").column(0).to_vec();
            let eps = *params.last().expect("epsilon");
            let mut ce = 0.0;
            let mut tr = 0.0;
            let mut dlogit = Array2::zeros((n, 1));
            let mut deps = 0.0;
            for i in 0..n {
                let z = logits[i];
                let g = sigmoid(z);
                ce += softplus(z) - t[i] * z;
                let gc = g.clamp(G_CLIP.0, G_CLIP.1);
                let h = t[i] / gc - (1.0 - t[i]) / (1.0 - gc);
                let r = yhat[i] + eps * h - y[i];
                tr += r * r;
                dyhat[i] += self.beta * 2.0 * r / b;
                deps += self.beta * 2.0 * r * h / b;
                let mut dz = self.alpha * (g - t[i]) / b;
                if g > G_CLIP.0 && g < G_CLIP.1 {
                    let dh = -t[i] / (gc * gc) - (1.0 - t[i]) / ((1.0 - gc) * (1.0 - gc));
                    dz += self.beta * 2.0 * r * eps * dh / b * g * (1.0 - g);
                }
                dlogit[[i, 0]] = dz;
            }
            loss += self.alpha * ce / b + self.beta * tr / b;
            prop_state = Some((ap, dlogit, deps));
        }

        if let Some(grads) = grads {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let d0 = Array2::from_shape_fn((n, 1), |(i, _)| (1.0 - t[i]) * dyhat[i]);
            let d1 = Array2::from_shape_fn((n, 1), |(i, _)| t[i] * dyhat[i]);
            let mut drep = self.head0.backward(params, &a0, d0, grads);
            drep += &self.head1.backward(params, &a1, d1, grads);
            if let (Some(prop), Some((ap, dlogit, deps))) = (&self.prop_head, prop_state) {
                drep += &prop.backward(params, &ap, dlogit, grads);
                *grads.last_mut().expect("epsilon") = deps;
            }
            self.trunk.backward(params, &ta, drep, grads);
        }
        loss
    }

    pub fn summary(&self) -> String {
        format!(
            "{} trunk={} head={} params={} checksum={}",
            if self.is_dragonnet() { "dragonnet" } else { "tarnet" },
            self.trunk.shape_summary(),
            self.head0.shape_summary(),
            self.params.len(),
            crate::rng::checksum(self.params.iter().copied())
        )
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct NetObjective<'a> {
    net: &'a TwoHeadNet,
    x: ArrayView2<'a, f64>,
    t: &'a [f64],
    y: &'a [f64],
    val: Option<(ArrayView2<'a, f64>, &'a [f64], &'a [f64])>,
}

impl Objective for NetObjective<'_> {
    fn n_params(&self) -> usize {
        self.net.params.len()
    }

    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn batch_loss_grad(&self, params: &[f64], rows: &[usize], grads: &mut [f64]) -> f64 {
        let xb = self.x.select(Axis(0), rows);
        let tb: Vec<f64> = rows.iter().map(|&i| self.t[i]).collect();
        let yb: Vec<f64> = rows.iter().map(|&i| self.y[i]).collect();
        self.net.loss_and_grad(params, xb.view(), &tb, &yb, Some(grads))
    }

    fn val_loss(&self, params: &[f64]) -> Option<f64> {
        let (x, t, y) = self.val?;
        Some(self.net.loss_and_grad(params, x, t, y, None))
    }
}

/// Train a TARNet (`dragonnet == false`) or Dragonnet. The validation
/// sample, if any, drives early stopping on the joint loss.
pub fn fit_two_head(
    x: ArrayView2<f64>,
    t: &[f64],
    y: &[f64],
    cfg: &NetConfig,
    dragonnet: bool,
    val: Option<(ArrayView2<f64>, &[f64], &[f64])>,
    seed: u64,
) -> Result<TwoHeadNet> {
    let mut net = TwoHeadNet::new(x.ncols(), cfg, dragonnet, seed)?;
    let mut params = net.params.clone();
    let history = {
        let obj = NetObjective { net: &net, x, t, y, val };
        train(&obj, &mut params, &cfg.train_config(), &mut crate::rng::stream(seed, "batches"))?
    };
    net.params = params;
    net.history = history;
    Ok(net)
}

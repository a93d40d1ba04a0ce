//! Dense ReLU networks on a flat parameter vector, trained with Adam.
//!
//! Networks keep every weight in one `Vec<f64>` so that optimizers, early
//! stopping snapshots and finite-difference checks can treat the model as a
//! plain vector. [`DenseLayout`] describes where one stack of layers lives in
//! that vector and implements its forward and backward passes.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_weights, Regressor};
use crate::error::{arg, Error, Result};
use crate::rng::Stream;

pub const DEFAULT_MAX_EPOCHS: usize = 300;
pub const DEFAULT_PATIENCE: usize = 10;

/// Location and shape of a stack of fully connected layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayout {
    pub dims: Vec<usize>,
    pub offset: usize,
    /// Apply ReLU after the final layer too (used for representation trunks).
    pub relu_last: bool,
}

impl DenseLayout {
    pub fn new(dims: Vec<usize>, offset: usize, relu_last: bool) -> Self {
        DenseLayout { dims, offset, relu_last }
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len().saturating_sub(1)
    }

    pub fn n_params(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn end(&self) -> usize {
        self.offset + self.n_params()
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("layout has at least an input dimension")
    }

    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut o = self.offset;
        for w in self.dims.windows(2).take(l) {
            o += w[0] * w[1] + w[1];
        }
        (o, o + self.dims[l] * self.dims[l + 1])
    }

    fn relu_at(&self, l: usize) -> bool {
        l + 1 < self.n_layers() || self.relu_last
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init(&self, params: &mut [f64], rng: &mut Stream) {
        for l in 0..self.n_layers() {
            let (wo, bo) = self.layer_offsets(l);
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[wo..bo] {
                *p = rng.random_range(-limit..limit);
            }
            params[bo..bo + fan_out].iter_mut().for_each(|b| *b = 0.0);
        }
    }

    /// Activations of every layer, input first.
    pub fn forward(&self, params: &[f64], x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        for l in 0..self.n_layers() {
            let (wo, bo) = self.layer_offsets(l);
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let w = ArrayView2::from_shape((fi, fo), &params[wo..bo]).expect("layer shape");
            let b = ArrayView1::from(&params[bo..bo + fo]);
            let mut z = acts[l].dot(&w) + b;
            if self.relu_at(l) {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Accumulate parameter gradients into `grads` given the gradient with
    /// respect to the output. Returns the gradient with respect to the input.
    pub fn backward(&self, params: &[f64], acts: &[Array2<f64>], d_out: Array2<f64>, grads: &mut [f64]) -> Array2<f64> {
        let mut delta = d_out;
        for l in (0..self.n_layers()).rev() {
            if self.relu_at(l) {
                delta.zip_mut_with(&acts[l + 1], |d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let (wo, bo) = self.layer_offsets(l);
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            {
                let mut gw = ArrayViewMut2::from_shape((fi, fo), &mut grads[wo..bo]).expect("layer shape");
                gw += &acts[l].t().dot(&delta);
            }
            for (g, s) in grads[bo..bo + fo].iter_mut().zip(delta.sum_axis(Axis(0))) {
                *g += s;
            }
            let w = ArrayView2::from_shape((fi, fo), &params[wo..bo]).expect("layer shape");
            delta = delta.dot(&w.t());
        }
        delta
    }

    pub fn shape_summary(&self) -> String {
        self.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("-")
    }
}

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.step += 1;
        let c1 = 1.0 - B1.powi(self.step);
        let c2 = 1.0 - B2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

/// Mini-batch objective trained by [`train`].
pub trait Objective {
    fn n_params(&self) -> usize;
    fn n_rows(&self) -> usize;
    /// Mean loss over `rows`; gradients are written (not accumulated) into `grads`.
    fn batch_loss_grad(&self, params: &[f64], rows: &[usize], grads: &mut [f64]) -> f64;
    /// Holdout loss used for early stopping, if a holdout exists.
    fn val_loss(&self, params: &[f64]) -> Option<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean training loss of each epoch, averaged over mini-batches by size.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (1-based) whose weights were kept; 0 means the initialization.
    pub best_epoch: usize,
}

/// Adam over shuffled mini-batches with early stopping on the holdout loss.
/// The best-scoring weights are written back into `params`.
pub fn train(obj: &impl Objective, params: &mut Vec<f64>, cfg: &TrainConfig, rng: &mut Stream) -> Result<TrainHistory> {
    if !(cfg.learning_rate > 0.0) || cfg.batch_size == 0 {
        return arg("training: learning rate and batch size must be positive");
    }
    let n = obj.n_rows();
    if n == 0 {
        return arg("training: no rows");
    }
    let batch = cfg.batch_size.min(n);
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut grads = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut hist = TrainHistory::default();
    let mut best_val = obj.val_loss(params).unwrap_or(f64::INFINITY);
    let mut best_params = params.clone();
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for rows in order.chunks(batch) {
            let loss = obj.batch_loss_grad(params, rows, &mut grads);
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    message: "loss became non-finite".into(),
                });
            }
            total += loss * rows.len() as f64;
            adam.update(params, &grads);
        }
        hist.train_loss.push(total / n as f64);
        match obj.val_loss(params) {
            Some(v) => {
                if !v.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        message: "holdout loss became non-finite".into(),
                    });
                }
                hist.val_loss.push(v);
                if v < best_val {
                    best_val = v;
                    best_params.clone_from(params);
                    hist.best_epoch = epoch;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= cfg.patience {
                        break;
                    }
                }
            }
            None => hist.best_epoch = epoch,
        }
    }
    if !hist.val_loss.is_empty() {
        *params = best_params;
    }
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_dims: vec![100],
            learning_rate: 1e-3,
            batch_size: 200,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layout: DenseLayout,
    pub params: Vec<f64>,
    pub history: TrainHistory,
}

impl MlpModel {
    pub fn summary(&self) -> String {
        format!(
            "mlp layers={} params={} checksum={}",
            self.layout.shape_summary(),
            self.params.len(),
            crate::rng::checksum(self.params.iter().copied())
        )
    }
}

impl Regressor for MlpModel {
    fn n_features(&self) -> usize {
        self.layout.dims[0]
    }

    fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        assert_eq!(x.ncols(), self.n_features(), "feature dimension mismatch");
        let acts = self.layout.forward(&self.params, x);
        acts.last().expect("output layer").column(0).to_vec()
    }
}

struct MlpObjective<'a> {
    layout: &'a DenseLayout,
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    w: Option<&'a [f64]>,
    val: Option<(ArrayView2<'a, f64>, &'a [f64])>,
}

fn weighted_mse_grad(pred: ArrayView1<f64>, y: &[f64], w: &[f64]) -> (f64, Array2<f64>) {
    let wsum: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut loss = 0.0;
    let mut d = Array2::zeros((y.len(), 1));
    for i in 0..y.len() {
        let r = pred[i] - y[i];
        loss += w[i] * r * r;
        d[[i, 0]] = 2.0 * w[i] * r / wsum;
    }
    (loss / wsum, d)
}

impl Objective for MlpObjective<'_> {
    fn n_params(&self) -> usize {
        self.layout.n_params()
    }

    fn n_rows(&self) -> usize {
        self.y.len()
    }

    fn batch_loss_grad(&self, params: &[f64], rows: &[usize], grads: &mut [f64]) -> f64 {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let xb = self.x.select(Axis(0), rows);
        let yb: Vec<f64> = rows.iter().map(|&i| self.y[i]).collect();
        let wb: Vec<f64> = rows.iter().map(|&i| self.w.map_or(1.0, |w| w[i])).collect();
        let acts = self.layout.forward(params, xb.view());
        let (loss, d) = weighted_mse_grad(acts.last().expect("output").column(0), &yb, &wb);
        self.layout.backward(params, &acts, d, grads);
        loss
    }

    fn val_loss(&self, params: &[f64]) -> Option<f64> {
        let (x, y) = self.val?;
        let acts = self.layout.forward(params, x);
        let pred = acts.last().expect("output").column(0).to_owned();
        Some(pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64)
    }
}

/// Fit a regression network; `val` drives early stopping when present.
pub fn fit_mlp(
    x: ArrayView2<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    cfg: &MlpConfig,
    val: Option<(ArrayView2<f64>, &[f64])>,
) -> Result<MlpModel> {
    let (n, d) = x.dim();
    if y.len() != n {
        return arg("mlp: x and y lengths differ");
    }
    check_weights(n, weights)?;
    if let Some((vx, vy)) = val {
        if vx.nrows() != vy.len() || vx.ncols() != d || vy.is_empty() {
            return arg("mlp: malformed holdout");
        }
    }
    let mut dims = vec![d];
    dims.extend(&cfg.hidden_dims);
    dims.push(1);
    let layout = DenseLayout::new(dims, 0, false);
    let mut params = vec![0.0; layout.n_params()];
    layout.init(&mut params, &mut crate::rng::stream(cfg.seed, "init"));
    let obj = MlpObjective {
        layout: &layout,
        x,
        y,
        w: weights,
        val,
    };
    let history = train(&obj, &mut params, &cfg.train_config(), &mut crate::rng::stream(cfg.seed, "batches"))?;
    Ok(MlpModel { layout, params, history })
}

/// Fit with a seeded 20% holdout carved from the training rows.
pub fn fit_mlp_auto_holdout(x: ArrayView2<f64>, y: &[f64], weights: Option<&[f64]>, cfg: &MlpConfig) -> Result<MlpModel> {
    let n = x.nrows();
    if n < 5 {
        return fit_mlp(x, y, weights, cfg, None);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::rng::stream(cfg.seed, "holdout"));
    let n_val = n / 5;
    let (v, t) = idx.split_at(n_val);
    let xt = x.select(Axis(0), t);
    let yt: Vec<f64> = t.iter().map(|&i| y[i]).collect();
    let wt: Option<Vec<f64>> = weights.map(|w| t.iter().map(|&i| w[i]).collect());
    let xv = x.select(Axis(0), v);
    let yv: Vec<f64> = v.iter().map(|&i| y[i]).collect();
    fit_mlp(xt.view(), &yt, wt.as_deref(), cfg, Some((xv.view(), &yv)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut r = crate::rng::stream(seed, "x");
        let x = Array2::from_shape_fn((n, 2), |_| r.random::<f64>());
        let y = x.outer_iter().map(|r| (3.0 * r[0]).sin() + r[1]).collect();
        (x, y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = toy(12, 1);
        let layout = DenseLayout::new(vec![2, 5, 4, 1], 0, false);
        let mut p = vec![0.0; layout.n_params()];
        layout.init(&mut p, &mut crate::rng::stream(2, "init"));
        let obj = MlpObjective {
            layout: &layout,
            x: x.view(),
            y: &y,
            w: None,
            val: None,
        };
        let rows: Vec<usize> = (0..12).collect();
        let mut g = vec![0.0; p.len()];
        obj.batch_loss_grad(&p, &rows, &mut g);
        let mut scratch = vec![0.0; p.len()];
        for i in 0..p.len() {
            let h = 1e-6;
            let mut a = p.clone();
            a[i] += h;
            let mut b = p.clone();
            b[i] -= h;
            let fd = (obj.batch_loss_grad(&a, &rows, &mut scratch) - obj.batch_loss_grad(&b, &rows, &mut scratch)) / (2.0 * h);
            let denom = fd.abs().max(g[i].abs()).max(1e-8);
            assert!((fd - g[i]).abs() / denom < 1e-4, "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (x, y) = toy(20, 3);
        let cfg = MlpConfig {
            max_epochs: 0,
            seed: 4,
            ..Default::default()
        };
        let m = fit_mlp(x.view(), &y, None, &cfg, None).unwrap();
        let mut p = vec![0.0; m.layout.n_params()];
        m.layout.init(&mut p, &mut crate::rng::stream(4, "init"));
        assert_eq!(m.params, p);
        assert!(m.predict(x.view()).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn learns_smooth_function() {
        let (x, y) = toy(400, 5);
        let (vx, vy) = toy(100, 6);
        let cfg = MlpConfig {
            hidden_dims: vec![32, 32],
            learning_rate: 1e-2,
            batch_size: 50,
            max_epochs: 200,
            patience: 20,
            seed: 1,
        };
        let m = fit_mlp(x.view(), &y, None, &cfg, Some((vx.view(), &vy))).unwrap();
        let best = m.history.val_loss[m.history.best_epoch - 1];
        assert!(best < 0.01, "{best}");
        let pred = m.predict(vx.view());
        let mse = pred.iter().zip(&vy).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / vy.len() as f64;
        assert!((mse - best).abs() < 1e-12);
    }

    #[test]
    fn divergence_reports_epoch() {
        let (x, _) = toy(20, 7);
        let y = vec![1e300; 20];
        let cfg = MlpConfig {
            learning_rate: 1e-2,
            ..Default::default()
        };
        let err = fit_mlp(x.view(), &y, None, &cfg, None).unwrap_err();
        assert!(matches!(err, Error::Training { epoch: 1, .. }));
    }
}

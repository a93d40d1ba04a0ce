//! Meta-learners assembled from base regressions and a propensity model.

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use super::{Components, LearnerKind, UpliftModel};
use crate::base::{ProbabilityModel, PropensitySpec, Regressor, RegressorSpec};
use crate::error::{arg, Result};
use crate::rng::derive_seed;

/// Row indices of the control and treated arms; both must be non-empty.
pub(crate) fn arms(t: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    let (mut c, mut tr) = (Vec::new(), Vec::new());
    for (i, v) in t.iter().enumerate() {
        if *v == 1.0 {
            tr.push(i);
        } else if *v == 0.0 {
            c.push(i);
        } else {
            return arg(format!("treatment must be 0 or 1, got {v} at row {i}"));
        }
    }
    if c.is_empty() || tr.is_empty() {
        return arg("both treatment arms must be present");
    }
    Ok((c, tr))
}

fn check_inputs(x: ArrayView2<f64>, t: &[f64], y: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    if t.len() != x.nrows() || y.len() != x.nrows() {
        return arg("x, t and y must have the same number of rows");
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return arg("inputs must be finite");
    }
    arms(t)
}

fn pick(v: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| v[i]).collect()
}

fn fit_on(
    base: &dyn RegressorSpec,
    x: ArrayView2<f64>,
    y: &[f64],
    rows: &[usize],
    seed: u64,
    part: &str,
) -> Result<Box<dyn Regressor>> {
    let xs = x.select(Axis(0), rows);
    base.fit(xs.view(), &pick(y, rows), None, derive_seed(seed, &[part]))
}

/// Design matrix of the S-learner: `[x, t]`, plus `t·x` for affine bases
/// which could not otherwise express a covariate-dependent effect.
pub fn s_design(x: ArrayView2<f64>, t: impl Fn(usize) -> f64, interactions: bool) -> Array2<f64> {
    let (n, d) = x.dim();
    let width = if interactions { 2 * d + 1 } else { d + 1 };
    Array2::from_shape_fn((n, width), |(i, j)| {
        if j < d {
            x[[i, j]]
        } else if j == d {
            t(i)
        } else {
            t(i) * x[[i, j - d - 1]]
        }
    })
}

pub fn fit_s_learner(x: ArrayView2<f64>, t: &[f64], y: &[f64], base: &dyn RegressorSpec, seed: u64) -> Result<UpliftModel> {
    check_inputs(x, t, y)?;
    let interactions = base.is_linear();
    let design = s_design(x, |i| t[i], interactions);
    let mu = base.fit(design.view(), y, None, derive_seed(seed, &["mu"]))?;
    Ok(UpliftModel::new(LearnerKind::S, x.ncols(), Components::S { mu, interactions }))
}

pub fn fit_t_learner(x: ArrayView2<f64>, t: &[f64], y: &[f64], base: &dyn RegressorSpec, seed: u64) -> Result<UpliftModel> {
    let (c, tr) = check_inputs(x, t, y)?;
    let mu0 = fit_on(base, x, y, &c, seed, "mu0")?;
    let mu1 = fit_on(base, x, y, &tr, seed, "mu1")?;
    Ok(UpliftModel::new(LearnerKind::T, x.ncols(), Components::T { mu0, mu1 }))
}

/// τ̂ = (1 − π̂)·τ̂¹ + π̂·τ̂⁰.
pub fn x_blend(tau1: &[f64], tau0: &[f64], pi: &[f64]) -> Vec<f64> {
    tau1.iter().zip(tau0).zip(pi).map(|((a, b), p)| (1.0 - p) * a + p * b).collect()
}

pub fn fit_x_learner(
    x: ArrayView2<f64>,
    t: &[f64],
    y: &[f64],
    base: &dyn RegressorSpec,
    prop: &dyn PropensitySpec,
    seed: u64,
) -> Result<UpliftModel> {
    let (c, tr) = check_inputs(x, t, y)?;
    let mu0 = fit_on(base, x, y, &c, seed, "mu0")?;
    let mu1 = fit_on(base, x, y, &tr, seed, "mu1")?;
    let xt = x.select(Axis(0), &tr);
    let xc = x.select(Axis(0), &c);
    let d1: Vec<f64> = mu0.predict(xt.view()).iter().zip(pick(y, &tr)).map(|(m, y)| y - m).collect();
    let d0: Vec<f64> = mu1.predict(xc.view()).iter().zip(pick(y, &c)).map(|(m, y)| m - y).collect();
    let tau1 = base.fit(xt.view(), &d1, None, derive_seed(seed, &["tau1"]))?;
    let tau0 = base.fit(xc.view(), &d0, None, derive_seed(seed, &["tau0"]))?;
    let pi = prop.fit(x, t)?;
    Ok(UpliftModel::new(LearnerKind::X, x.ncols(), Components::X { tau0, tau1, pi }))
}

fn residuals(
    x: ArrayView2<f64>,
    t: &[f64],
    y: &[f64],
    base: &dyn RegressorSpec,
    prop: &dyn PropensitySpec,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = base.fit(x, y, None, derive_seed(seed, &["m"]))?;
    let pi = prop.fit(x, t)?;
    let ry = m.predict(x).iter().zip(y).map(|(m, y)| y - m).collect();
    let rt = pi.predict_proba(x).iter().zip(t).map(|(p, t)| t - p).collect();
    Ok((ry, rt))
}

/// Targets r_y/r_t and weights r_t². Units with |r_t| < `clip_eps` get zero
/// weight (and a zero target) so nothing is divided by a tiny residual.
pub fn r_learner_targets(ry: &[f64], rt: &[f64], clip_eps: f64) -> (Vec<f64>, Vec<f64>) {
    ry.iter()
        .zip(rt)
        .map(|(a, b)| {
            if b.abs() < clip_eps {
                (0.0, 0.0)
            } else {
                assert!(b.abs() >= clip_eps);
                (a / b, b * b)
            }
        })
        .unzip()
}

/// Targets r_y / clip(r_t) with the denominator pushed away from zero.
pub fn u_learner_targets(ry: &[f64], rt: &[f64], clip_eps: f64) -> Vec<f64> {
    ry.iter()
        .zip(rt)
        .map(|(a, b)| {
            let den = if *b < 0.0 { -b.abs().max(clip_eps) } else { b.max(clip_eps) };
            assert!(den.abs() >= clip_eps);
            a / den
        })
        .collect()
}

pub fn fit_r_learner(
    x: ArrayView2<f64>,
    t: &[f64],
    y: &[f64],
    base: &dyn RegressorSpec,
    prop: &dyn PropensitySpec,
    clip_eps: f64,
    seed: u64,
) -> Result<UpliftModel> {
    check_inputs(x, t, y)?;
    let (ry, rt) = residuals(x, t, y, base, prop, seed)?;
    let (target, w) = r_learner_targets(&ry, &rt, clip_eps);
    if w.iter().all(|v| *v == 0.0) {
        return Err(crate::error::Error::Numerical("r-learner: every treatment residual is below the clipping bound".into()));
    }
    let tau = base.fit(x, &target, Some(&w), derive_seed(seed, &["tau"]))?;
    Ok(UpliftModel::new(LearnerKind::R, x.ncols(), Components::Effect(tau)))
}

pub fn fit_u_learner(
    x: ArrayView2<f64>,
    t: &[f64],
    y: &[f64],
    base: &dyn RegressorSpec,
    prop: &dyn PropensitySpec,
    clip_eps: f64,
    seed: u64,
) -> Result<UpliftModel> {
    check_inputs(x, t, y)?;
    let (ry, rt) = residuals(x, t, y, base, prop, seed)?;
    let target = u_learner_targets(&ry, &rt, clip_eps);
    let tau = base.fit(x, &target, None, derive_seed(seed, &["tau"]))?;
    Ok(UpliftModel::new(LearnerKind::U, x.ncols(), Components::Effect(tau)))
}

/// Y¹_DR − Y⁰_DR with π̂ clipped to [clip_eps, 1 − clip_eps].
pub fn dr_pseudo_outcomes(y: &[f64], t: &[f64], mu0: &[f64], mu1: &[f64], pi: &[f64], clip_eps: f64) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let p = pi[i].clamp(clip_eps, 1.0 - clip_eps);
            assert!(p >= clip_eps && 1.0 - p >= clip_eps);
            let y1 = mu1[i] + t[i] / p * (y[i] - mu1[i]);
            let y0 = mu0[i] + (1.0 - t[i]) / (1.0 - p) * (y[i] - mu0[i]);
            y1 - y0
        })
        .collect()
}

/// t(y − μ̂₀) + (1 − t)(μ̂₁ − y).
pub fn ra_pseudo_outcomes(y: &[f64], t: &[f64], mu0: &[f64], mu1: &[f64]) -> Vec<f64> {
    (0..y.len()).map(|i| t[i] * (y[i] - mu0[i]) + (1.0 - t[i]) * (mu1[i] - y[i])).collect()
}

pub fn fit_dr_learner(
    x: ArrayView2<f64>,
    t: &[f64],
    y: &[f64],
    base: &dyn RegressorSpec,
    prop: &dyn PropensitySpec,
    clip_eps: f64,
    seed: u64,
) -> Result<UpliftModel> {
    let (c, tr) = check_inputs(x, t, y)?;
    let mu0 = fit_on(base, x, y, &c, seed, "mu0")?;
    let mu1 = fit_on(base, x, y, &tr, seed, "mu1")?;
    let pi = prop.fit(x, t)?.predict_proba(x);
    let pseudo = dr_pseudo_outcomes(y, t, &mu0.predict(x), &mu1.predict(x), &pi, clip_eps);
    let tau = base.fit(x, &pseudo, None, derive_seed(seed, &["tau"]))?;
    Ok(UpliftModel::new(LearnerKind::DR, x.ncols(), Components::Effect(tau)))
}

pub fn fit_ra_learner(x: ArrayView2<f64>, t: &[f64], y: &[f64], base: &dyn RegressorSpec, seed: u64) -> Result<UpliftModel> {
    let (c, tr) = check_inputs(x, t, y)?;
    let mu0 = fit_on(base, x, y, &c, seed, "mu0")?;
    let mu1 = fit_on(base, x, y, &tr, seed, "mu1")?;
    let pseudo = ra_pseudo_outcomes(y, t, &mu0.predict(x), &mu1.predict(x));
    let tau = base.fit(x, &pseudo, None, derive_seed(seed, &["tau"]))?;
    Ok(UpliftModel::new(LearnerKind::RA, x.ncols(), Components::Effect(tau)))
}

pub(crate) fn predict_s(mu: &dyn Regressor, x: ArrayView2<f64>, interactions: bool) -> Vec<f64> {
    let on = s_design(x, |_| 1.0, interactions);
    let off = s_design(x, |_| 0.0, interactions);
    let both = concatenate(Axis(0), &[on.view(), off.view()]).expect("same width");
    let p = mu.predict(both.view());
    let n = x.nrows();
    (0..n).map(|i| p[i] - p[n + i]).collect()
}

pub(crate) fn predict_x(tau0: &dyn Regressor, tau1: &dyn Regressor, pi: &dyn ProbabilityModel, x: ArrayView2<f64>) -> Vec<f64> {
    x_blend(&tau1.predict(x), &tau0.predict(x), &pi.predict_proba(x))
}

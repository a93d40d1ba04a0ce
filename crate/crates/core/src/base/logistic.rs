//! L2-penalized logistic regression fitted by damped Newton iterations.
//!
//! The objective is the mean log-likelihood minus `‖w‖² / (2C)` over the
//! slope coefficients. Averaging (rather than summing) the likelihood makes
//! the fit invariant to duplicating every row.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use super::ProbabilityModel;
use crate::error::{arg, Error, Result};

pub const MAX_NEWTON_ITERS: usize = 100;
pub const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub c: f64,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn logit(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.slopes).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl ProbabilityModel for LogisticModel {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        assert_eq!(x.ncols(), self.slopes.len(), "feature dimension mismatch");
        x.outer_iter()
            .map(|r| {
                let z = self.intercept + r.iter().zip(&self.slopes).map(|(a, b)| a * b).sum::<f64>();
                crate::dgp::sigmoid(z)
            })
            .collect()
    }
}

fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: ArrayView2<'a, f64>,
    t: &'a [f64],
    inv_c: f64,
}

impl Problem<'_> {
    fn logits(&self, w: &DVector<f64>) -> Vec<f64> {
        self.x
            .outer_iter()
            .map(|r| w[0] + r.iter().enumerate().map(|(j, v)| w[j + 1] * v).sum::<f64>())
            .collect()
    }

    /// Penalized mean log-likelihood (to be maximized).
    fn objective(&self, w: &DVector<f64>) -> f64 {
        let n = self.t.len() as f64;
        let ll: f64 = self
            .logits(w)
            .iter()
            .zip(self.t)
            .map(|(z, t)| t * z - log1pexp(*z))
            .sum::<f64>()
            / n;
        ll - 0.5 * self.inv_c * w.iter().skip(1).map(|v| v * v).sum::<f64>()
    }

    fn gradient_hessian(&self, w: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = w.len();
        let n = self.t.len() as f64;
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        let mut row = vec![1.0; d];
        for (i, z) in self.logits(w).into_iter().enumerate() {
            for j in 1..d {
                row[j] = self.x[[i, j - 1]];
            }
            let p = crate::dgp::sigmoid(z);
            let r = self.t[i] - p;
            let s = p * (1.0 - p);
            for j in 0..d {
                g[j] += r * row[j];
                for k in 0..=j {
                    h[(j, k)] += s * row[j] * row[k];
                }
            }
        }
        g /= n;
        h /= n;
        for j in 0..d {
            for k in 0..j {
                h[(k, j)] = h[(j, k)];
            }
        }
        for j in 1..d {
            g[j] -= self.inv_c * w[j];
            h[(j, j)] += self.inv_c;
        }
        // h now holds the negated Hessian of the objective.
        (g, h)
    }
}

/// Max-norm of the penalized gradient at the model's weights.
pub fn penalized_gradient_norm(model: &LogisticModel, x: ArrayView2<f64>, t: &[f64]) -> f64 {
    let p = Problem { x, t, inv_c: 1.0 / model.c };
    let mut w = DVector::zeros(model.slopes.len() + 1);
    w[0] = model.intercept;
    for (j, s) in model.slopes.iter().enumerate() {
        w[j + 1] = *s;
    }
    p.gradient_hessian(&w).0.amax()
}

pub fn fit_logistic(x: ArrayView2<f64>, t: &[f64], c: f64) -> Result<LogisticModel> {
    let (n, d) = x.dim();
    if t.len() != n {
        return arg("logistic: x and t lengths differ");
    }
    if !(c > 0.0 && c.is_finite()) {
        return arg(format!("logistic: C must be positive, got {c}"));
    }
    if t.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return arg("logistic: labels must be 0 or 1");
    }
    let n1 = t.iter().filter(|v| **v == 1.0).count();
    if n1 == 0 || n1 == n {
        return arg("logistic: both classes must be present");
    }
    let prob = Problem { x, t, inv_c: 1.0 / c };
    let mut w = DVector::zeros(d + 1);
    let rate = n1 as f64 / n as f64;
    w[0] = (rate / (1.0 - rate)).ln();
    let mut obj = prob.objective(&w);
    let mut iterations = 0;
    for it in 0..MAX_NEWTON_ITERS {
        let (g, mut h) = prob.gradient_hessian(&w);
        if g.amax() < GRAD_TOL {
            break;
        }
        iterations = it + 1;
        // The intercept direction is unpenalized; a tiny jitter keeps the
        // factorization defined when fitted probabilities saturate.
        h[(0, 0)] += 1e-12;
        let step = h
            .cholesky()
            .ok_or_else(|| Error::Numerical("logistic: Hessian is not positive definite".into()))?
            .solve(&g);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = &w + &step * scale;
            let cand_obj = prob.objective(&cand);
            if cand_obj.is_finite() && cand_obj >= obj {
                w = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("logistic: non-finite weights".into()));
    }
    Ok(LogisticModel {
        intercept: w[0],
        slopes: w.iter().skip(1).copied().collect(),
        c,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{concatenate, Array2, Axis};
    use rand::Rng;

    fn data(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut r = crate::rng::stream(seed, "logit");
        let x = Array2::from_shape_fn((n, 3), |_| r.random::<f64>());
        let t = x
            .outer_iter()
            .map(|row| {
                let p = crate::dgp::sigmoid(2.0 * row[0] - row[1] - 0.3);
                if r.random::<f64>() < p { 1.0 } else { 0.0 }
            })
            .collect();
        (x, t)
    }

    #[test]
    fn first_order_condition() {
        let (x, t) = data(500, 1);
        for c in [0.01, 1.0, 10.0] {
            let m = fit_logistic(x.view(), &t, c).unwrap();
            assert!(penalized_gradient_norm(&m, x.view(), &t) < 1e-6);
        }
    }

    #[test]
    fn duplicated_rows_give_same_weights() {
        let (x, t) = data(200, 2);
        let m1 = fit_logistic(x.view(), &t, 1.0).unwrap();
        let x2 = concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let t2: Vec<f64> = t.iter().chain(&t).copied().collect();
        let m2 = fit_logistic(x2.view(), &t2, 1.0).unwrap();
        assert!((m1.intercept - m2.intercept).abs() < 1e-8);
        for (a, b) in m1.slopes.iter().zip(&m2.slopes) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn separable_data_stays_inside_unit_interval() {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64 / 39.0);
        let t: Vec<f64> = (0..40).map(|i| if i >= 20 { 1.0 } else { 0.0 }).collect();
        let m = fit_logistic(x.view(), &t, 10.0).unwrap();
        for p in m.predict_proba(x.view()) {
            assert!(p > 1e-12 && p < 1.0 - 1e-12);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Array2::zeros((5, 2));
        assert!(matches!(fit_logistic(x.view(), &[1.0; 5], 1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn independent_labels_give_flat_fit() {
        // Each row appears once treated and once untreated.
        let (x, _) = data(100, 3);
        let x2 = concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let t: Vec<f64> = (0..200).map(|i| if i < 100 { 1.0 } else { 0.0 }).collect();
        let m = fit_logistic(x2.view(), &t, 1.0).unwrap();
        assert!(m.intercept.abs() < 1e-10);
        assert!(m.slopes.iter().all(|s| s.abs() < 1e-10));
    }
}

//! Closed-form (weighted) ridge regression with an unpenalized intercept.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use super::{check_weights, Regressor};
use crate::error::{arg, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl Regressor for RidgeModel {
    fn n_features(&self) -> usize {
        self.slopes.len()
    }

    fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        assert_eq!(x.ncols(), self.slopes.len(), "feature dimension mismatch");
        x.outer_iter()
            .map(|row| self.intercept + row.iter().zip(&self.slopes).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

/// Minimize Σ w_i (y_i − b − xᵢᵀβ)² + λ‖β‖². Solved on centered data, so the
/// intercept is the weighted mean residual.
pub fn fit_ridge(x: ArrayView2<f64>, y: &[f64], weights: Option<&[f64]>, lambda: f64) -> Result<RidgeModel> {
    let (n, d) = x.dim();
    if y.len() != n {
        return arg("ridge: x and y lengths differ");
    }
    if !(lambda >= 0.0) {
        return arg(format!("ridge: lambda must be non-negative, got {lambda}"));
    }
    check_weights(n, weights)?;
    if lambda == 0.0 && n < d + 1 {
        return arg(format!("ridge: need at least {} rows without regularization, got {n}", d + 1));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..n).map(w).sum();
    if !(wsum > 0.0) {
        return arg("ridge: total weight is zero");
    }
    let mut xm = vec![0.0; d];
    let mut ym = 0.0;
    for i in 0..n {
        let wi = w(i);
        ym += wi * y[i];
        for j in 0..d {
            xm[j] += wi * x[[i, j]];
        }
    }
    ym /= wsum;
    xm.iter_mut().for_each(|v| *v /= wsum);

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut xc = vec![0.0; d];
    for i in 0..n {
        let wi = w(i);
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            xc[j] = x[[i, j]] - xm[j];
        }
        let yc = y[i] - ym;
        for j in 0..d {
            rhs[j] += wi * xc[j] * yc;
            for k in 0..=j {
                gram[(j, k)] += wi * xc[j] * xc[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            gram[(k, j)] = gram[(j, k)];
        }
        gram[(j, j)] += lambda;
    }
    let slopes = if d == 0 {
        DVector::zeros(0)
    } else {
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("ridge: normal equations are singular".into()))?;
        let diag: Vec<f64> = (0..d).map(|j| chol.l_dirty()[(j, j)].abs()).collect();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        if !(lo > hi * 1e-7) {
            return Err(Error::Numerical("ridge: normal equations are singular".into()));
        }
        chol.solve(&rhs)
    };
    if slopes.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("ridge: non-finite solution".into()));
    }
    let intercept = ym - slopes.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
    Ok(RidgeModel {
        intercept,
        slopes: slopes.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn random_x(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut r = crate::rng::stream(seed, "x");
        Array2::from_shape_fn((n, d), |_| r.random::<f64>())
    }

    #[test]
    fn exact_linear_interpolation() {
        let x = random_x(50, 3, 1);
        let y: Vec<f64> = x.outer_iter().map(|r| 1.5 + 2.0 * r[0] - 3.0 * r[1] + 0.5 * r[2]).collect();
        let m = fit_ridge(x.view(), &y, None, 0.0).unwrap();
        let pred = m.predict(x.view());
        let max = pred.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max <= 1e-8, "{max}");
    }

    #[test]
    fn constant_target() {
        let x = random_x(20, 2, 2);
        let m = fit_ridge(x.view(), &[4.0; 20], None, 0.0).unwrap();
        assert!((m.intercept - 4.0).abs() < 1e-12);
        assert!(m.slopes.iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn heavy_penalty_shrinks_slopes() {
        let x = random_x(40, 3, 3);
        let y: Vec<f64> = x.outer_iter().map(|r| 10.0 * r[0] + r[2]).collect();
        let m = fit_ridge(x.view(), &y, None, 1e9).unwrap();
        let norm = m.slopes.iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!(norm < 1e-3);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((m.intercept - mean).abs() < 1e-3);
    }

    #[test]
    fn singular_without_penalty() {
        let x = Array2::from_shape_fn((5, 2), |(i, _)| i as f64);
        let err = fit_ridge(x.view(), &[1.0, 2.0, 3.0, 4.0, 5.0], None, 0.0).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert!(fit_ridge(x.view(), &[1.0, 2.0, 3.0, 4.0, 5.0], None, 1e-3).is_ok());
        assert!(fit_ridge(random_x(2, 3, 1).view(), &[1.0, 2.0], None, 0.0).is_err());
    }

    #[test]
    fn zero_weight_rows_ignored() {
        let x = random_x(30, 2, 4);
        let mut y: Vec<f64> = x.outer_iter().map(|r| r[0] - r[1]).collect();
        let mut w = vec![1.0; 30];
        y[3] = 1e6;
        w[3] = 0.0;
        let m = fit_ridge(x.view(), &y, Some(&w), 0.0).unwrap();
        assert!((m.slopes[0] - 1.0).abs() < 1e-9 && (m.slopes[1] + 1.0).abs() < 1e-9);
    }
}

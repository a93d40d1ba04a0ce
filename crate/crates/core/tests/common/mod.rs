#![allow(dead_code)]

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use uplift_core::data::Sample;
use uplift_core::rng::stream;

pub fn uniform_x(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut r = stream(seed, "test-x");
    Array2::from_shape_fn((n, d), |_| r.random::<f64>())
}

/// Linear potential outcomes μ₀ = 1 + b₀ᵀx, μ₁ = 2 + b₁ᵀx.
pub struct LinearTruth {
    pub b0: Vec<f64>,
    pub b1: Vec<f64>,
}

impl LinearTruth {
    pub fn new(d: usize, seed: u64) -> Self {
        let mut r = stream(seed, "test-coef");
        LinearTruth {
            b0: (0..d).map(|_| r.random_range(-2.0..2.0)).collect(),
            b1: (0..d).map(|_| r.random_range(-2.0..2.0)).collect(),
        }
    }

    pub fn mu0(&self, row: &[f64]) -> f64 {
        1.0 + row.iter().zip(&self.b0).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn mu1(&self, row: &[f64]) -> f64 {
        2.0 + row.iter().zip(&self.b1).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn tau(&self, x: &Array2<f64>) -> Vec<f64> {
        x.outer_iter().map(|r| self.mu1(r.as_slice().unwrap()) - self.mu0(r.as_slice().unwrap())).collect()
    }
}

/// Noiseless sample in which every covariate row appears once treated and
/// once untreated, so assignment is independent of x exactly (propensity 0.5).
pub fn paired_linear_sample(n_pairs: usize, d: usize, truth: &LinearTruth, seed: u64) -> Sample {
    let base = uniform_x(n_pairs, d, seed);
    let x = concatenate(Axis(0), &[base.view(), base.view()]).unwrap();
    let t: Vec<f64> = (0..2 * n_pairs).map(|i| if i < n_pairs { 1.0 } else { 0.0 }).collect();
    let y = x
        .outer_iter()
        .zip(&t)
        .map(|(r, t)| {
            let r = r.as_slice().unwrap();
            if *t == 1.0 { truth.mu1(r) } else { truth.mu0(r) }
        })
        .collect();
    let tau = truth.tau(&x);
    Sample::new(x, t, y, Some(tau)).unwrap()
}

pub fn pehe(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Random RCT-style sample with a smooth heterogeneous effect and noise.
pub fn noisy_sample(n: usize, d: usize, seed: u64) -> Sample {
    let x = uniform_x(n, d, seed);
    let mut r = stream(seed, "test-ty");
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for row in x.outer_iter() {
        let ti = if r.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let te = 1.0 + row[0] - row[1 % d];
        let yi = row.sum() + ti * te + 0.1 * (r.random::<f64>() - 0.5);
        t.push(ti);
        y.push(yi);
        tau.push(te);
    }
    Sample::new(x, t, y, Some(tau)).unwrap()
}

//! Semi-synthetic data-generating process.
//!
//! Covariates X (scaled to [0, 1]) are kept from a real or synthetic table.
//! Treatment follows a logistic model in the unit's own baseline ζ_i and the
//! neighborhood mean σ_N(i); potential outcomes mix a polynomial baseline γ_i^t
//! with the neighborhood mean γ_N(i)^t scaled by the spillover strength θ_t.
//! Learners only see X_obs, a noisy and column-masked copy of X.

mod io;
mod neighbors;

pub use io::{read_dataset, read_metadata, write_dataset, DatasetTable, DatasetMetadata};
pub use neighbors::NeighborIndex;

use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{floor_count, CovariateMatrix, Sample};
use crate::error::{arg, Result};
use crate::rng;

/// Mean and variance of the treatment-baseline coefficients β_T.
pub const BETA_T_MEAN: f64 = -0.2;
pub const BETA_T_VAR: f64 = 0.01;
/// Bernoulli rates of the outcome polynomial coefficients.
pub const P_BETA0_LIN: f64 = 0.3;
pub const P_BETA0_QUAD: f64 = 0.2;
pub const P_BETA1_LIN: f64 = 0.2;
pub const P_BETA1_QUAD: f64 = 0.5;
pub const P_BETA1_CUBIC: f64 = 0.6;

/// One of the four bias families, each sweeping a single knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    /// Selection bias, knob ξ.
    A,
    /// Spillover, knob θ₀ (θ₁ paired).
    B,
    /// Measurement error, knob ω.
    C,
    /// Unobserved confounding, knob m.
    D,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::A, Setting::B, Setting::C, Setting::D];

    pub fn tag(self) -> &'static str {
        match self {
            Setting::A => "A",
            Setting::B => "B",
            Setting::C => "C",
            Setting::D => "D",
        }
    }

    pub fn parse(s: &str) -> Option<Setting> {
        match s.trim() {
            "A" | "a" => Some(Setting::A),
            "B" | "b" => Some(Setting::B),
            "C" | "c" => Some(Setting::C),
            "D" | "d" => Some(Setting::D),
            _ => None,
        }
    }

    /// The three knob values of the benchmark grid, mildest first.
    pub fn default_knobs(self) -> [f64; 3] {
        match self {
            Setting::A => [0.8, 1.6, 2.4],
            Setting::B => [0.4, 0.5, 0.6],
            Setting::C => [1.2, 2.4, 3.6],
            Setting::D => [0.1, 0.3, 0.5],
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// θ₁ paired with a θ₀ knob: (0.4, 0.8), (0.5, 0.95), (0.6, 1.1), and the
/// same line θ₁ = 0.8 + 1.5(θ₀ − 0.4) off the grid.
pub fn paired_theta1(theta0: f64) -> f64 {
    match theta0 {
        v if v == 0.4 => 0.8,
        v if v == 0.5 => 0.95,
        v if v == 0.6 => 1.1,
        v => 0.8 + 1.5 * (v - 0.4),
    }
}

/// Seeds for each independent random stream of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DgpSeeds {
    pub coeff_seed: u64,
    pub treat_seed: u64,
    pub noise_seed: u64,
    pub measurement_seed: u64,
    pub mask_seed: u64,
}

impl DgpSeeds {
    /// Independent per-purpose seeds under one base seed.
    pub fn from_base(base: u64) -> Self {
        DgpSeeds {
            coeff_seed: rng::derive_seed(base, &["coefficients"]),
            treat_seed: rng::derive_seed(base, &["treatment"]),
            noise_seed: rng::derive_seed(base, &["outcome-noise"]),
            measurement_seed: rng::derive_seed(base, &["measurement"]),
            mask_seed: rng::derive_seed(base, &["masking"]),
        }
    }
}

/// All knobs of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    /// Selection-bias strength ξ; 0 gives a randomized trial.
    pub xi: f64,
    pub theta0: f64,
    pub theta1: f64,
    /// Measurement-error level ω; per-entry noise variance is ω/d.
    pub omega: f64,
    /// Fraction of covariate columns hidden from the learners.
    pub m: f64,
    pub radius: f64,
    pub outcome_noise_var: f64,
    pub seeds: DgpSeeds,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            xi: 0.0,
            theta0: 0.4,
            theta1: 0.8,
            omega: 1.2,
            m: 0.1,
            radius: 0.1,
            outcome_noise_var: 0.1,
            seeds: DgpSeeds::from_base(0),
        }
    }
}

impl DgpConfig {
    /// The benchmark configuration for one (setting, knob) cell: the varied
    /// knob is set, everything else stays at its default level.
    pub fn for_setting(setting: Setting, knob: f64, seeds: DgpSeeds) -> Self {
        let mut c = DgpConfig { seeds, ..DgpConfig::default() };
        match setting {
            Setting::A => c.xi = knob,
            Setting::B => {
                c.theta0 = knob;
                c.theta1 = paired_theta1(knob);
            }
            Setting::C => c.omega = knob,
            Setting::D => c.m = knob,
        }
        c
    }

    /// Every knob off: randomized, no spillover, error or masking.
    pub fn rct(seeds: DgpSeeds) -> Self {
        DgpConfig {
            xi: 0.0,
            theta0: 0.0,
            theta1: 0.0,
            omega: 0.0,
            m: 0.0,
            seeds,
            ..DgpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return arg(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.omega >= 0.0) {
            return arg(format!("omega must be non-negative, got {}", self.omega));
        }
        if !(0.0..1.0).contains(&self.m) {
            return arg(format!("m must lie in [0, 1), got {}", self.m));
        }
        if !(self.outcome_noise_var >= 0.0) {
            return arg(format!("outcome noise variance must be non-negative, got {}", self.outcome_noise_var));
        }
        if ![self.xi, self.theta0, self.theta1].iter().all(|v| v.is_finite()) {
            return arg("xi and theta must be finite");
        }
        Ok(())
    }
}

/// Sampled coefficients of the treatment and outcome models.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub beta_t: Vec<f64>,
    pub beta0_lin: Vec<f64>,
    pub beta0_quad: Array2<f64>,
    pub beta1_lin: Vec<f64>,
    pub beta1_quad: Array2<f64>,
    pub beta1_cubic: Array3<f64>,
}

impl CoefficientSet {
    pub fn d(&self) -> usize {
        self.beta_t.len()
    }

    pub fn checksums(&self) -> Vec<(String, String)> {
        vec![
            ("beta_t".into(), rng::checksum(self.beta_t.iter().copied())),
            ("beta0_lin".into(), rng::checksum(self.beta0_lin.iter().copied())),
            ("beta0_quad".into(), rng::checksum(self.beta0_quad.iter().copied())),
            ("beta1_lin".into(), rng::checksum(self.beta1_lin.iter().copied())),
            ("beta1_quad".into(), rng::checksum(self.beta1_quad.iter().copied())),
            ("beta1_cubic".into(), rng::checksum(self.beta1_cubic.iter().copied())),
        ]
    }
}

pub fn draw_coefficients(d: usize, coeff_seed: u64) -> CoefficientSet {
    assert!(d >= 1, "dimension must be positive");
    let mut s = rng::stream(coeff_seed, "coefficients");
    let sd = BETA_T_VAR.sqrt();
    let beta_t = (0..d)
        .map(|_| BETA_T_MEAN + sd * s.sample::<f64, _>(StandardNormal))
        .collect();
    let mut bern = |p: f64| if s.random::<f64>() < p { 1.0 } else { 0.0 };
    let beta0_lin = (0..d).map(|_| bern(P_BETA0_LIN)).collect();
    let beta0_quad = Array2::from_shape_simple_fn((d, d), || bern(P_BETA0_QUAD));
    let beta1_lin = (0..d).map(|_| bern(P_BETA1_LIN)).collect();
    let beta1_quad = Array2::from_shape_simple_fn((d, d), || bern(P_BETA1_QUAD));
    let beta1_cubic = Array3::from_shape_simple_fn((d, d, d), || bern(P_BETA1_CUBIC));
    CoefficientSet {
        beta_t,
        beta0_lin,
        beta0_quad,
        beta1_lin,
        beta1_quad,
        beta1_cubic,
    }
}

/// Individual baselines (ζ, γ⁰, γ¹) per unit. Polynomial sums run over all
/// ordered index tuples.
pub fn compute_baselines(x: &Array2<f64>, c: &CoefficientSet) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = c.d();
    assert_eq!(x.ncols(), d, "coefficient dimension mismatch");
    let n = x.nrows();
    let mut zeta = Vec::with_capacity(n);
    let mut gamma0 = Vec::with_capacity(n);
    let mut gamma1 = Vec::with_capacity(n);
    for row in x.outer_iter() {
        let mut z = 0.0;
        let mut lin0 = 0.0;
        let mut lin1 = 0.0;
        for j in 0..d {
            z += c.beta_t[j] * row[j];
            lin0 += c.beta0_lin[j] * row[j];
            lin1 += c.beta1_lin[j] * row[j];
        }
        let mut quad0 = 0.0;
        let mut quad1 = 0.0;
        let mut cubic1 = 0.0;
        for j in 0..d {
            for k in 0..d {
                let xjk = row[j] * row[k];
                quad0 += c.beta0_quad[[j, k]] * xjk;
                quad1 += c.beta1_quad[[j, k]] * xjk;
                for l in 0..d {
                    cubic1 += c.beta1_cubic[[j, k, l]] * xjk * row[l];
                }
            }
        }
        zeta.push(z);
        gamma0.push(lin0 + quad0);
        gamma1.push(lin1 + quad1 + cubic1);
    }
    (zeta, gamma0, gamma1)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Treatment propensities p_i = sigmoid(ξ(ζ_i + 0.2σ_N(i) + 0.3)) and the
/// Bernoulli draws. Returns (t, propensity, σ_N).
pub fn assign_treatment(zeta: &[f64], nbr: &NeighborIndex, xi: f64, treat_seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let sigma = nbr.neighbor_mean(zeta);
    let mut s = rng::stream(treat_seed, "treatment");
    let mut t = Vec::with_capacity(zeta.len());
    let mut p = Vec::with_capacity(zeta.len());
    for (z, sg) in zeta.iter().zip(&sigma) {
        let pi = sigmoid(xi * (z + 0.2 * sg + 0.3));
        let u: f64 = s.random();
        t.push(if u < pi { 1.0 } else { 0.0 });
        p.push(pi);
    }
    (t, p, sigma)
}

/// Potential and factual outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcomes {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub y: Vec<f64>,
    pub tau: Vec<f64>,
    pub eps: Vec<f64>,
    pub gamma0_nbr: Vec<f64>,
    pub gamma1_nbr: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn generate_outcomes(
    gamma0: &[f64],
    gamma1: &[f64],
    nbr: &NeighborIndex,
    theta0: f64,
    theta1: f64,
    t: &[f64],
    noise_var: f64,
    noise_seed: u64,
) -> Outcomes {
    let g0n = nbr.neighbor_mean(gamma0);
    let g1n = nbr.neighbor_mean(gamma1);
    let sd = noise_var.sqrt();
    let mut s = rng::stream(noise_seed, "outcome-noise");
    let n = gamma0.len();
    let mut out = Outcomes {
        y0: Vec::with_capacity(n),
        y1: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        tau: Vec::with_capacity(n),
        eps: Vec::with_capacity(n),
        gamma0_nbr: Vec::new(),
        gamma1_nbr: Vec::new(),
    };
    for i in 0..n {
        let y0 = gamma0[i] + theta0 * g0n[i];
        let y1 = gamma1[i] + theta1 * g1n[i];
        let eps = sd * s.sample::<f64, _>(StandardNormal);
        let factual = if t[i] == 1.0 { y1 } else { y0 };
        out.y0.push(y0);
        out.y1.push(y1);
        out.y.push(factual + eps);
        out.tau.push(y1 - y0);
        out.eps.push(eps);
    }
    out.gamma0_nbr = g0n;
    out.gamma1_nbr = g1n;
    out
}

/// X + N(0, ω/d_total) per entry; the input is untouched.
pub fn apply_measurement_error(x: &Array2<f64>, omega: f64, d_total: usize, seed: u64) -> Array2<f64> {
    let mut obs = x.clone();
    if omega == 0.0 {
        return obs;
    }
    let sd = (omega / d_total as f64).sqrt();
    let mut s = rng::stream(seed, "measurement");
    obs.mapv_inplace(|v| v + sd * s.sample::<f64, _>(StandardNormal));
    obs
}

/// Drop ⌊m·d⌋ columns chosen uniformly without replacement. Returns the
/// remaining matrix and the kept column indices in original order.
pub fn mask_confounders(x: &Array2<f64>, m: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let d = x.ncols();
    let n_drop = floor_count(m, d);
    let mut s = rng::stream(seed, "masking");
    let dropped = rand::seq::index::sample(&mut s, d, n_drop).into_vec();
    let kept: Vec<usize> = (0..d).filter(|j| !dropped.contains(j)).collect();
    (x.select(Axis(1), &kept), kept)
}

/// One generated dataset with every intermediate quantity retained.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiSyntheticDataset {
    pub config: DgpConfig,
    pub coefficients: CoefficientSet,
    pub x_true: CovariateMatrix,
    pub x_obs: Array2<f64>,
    /// Columns of `x_true` visible in `x_obs`.
    pub obs_columns: Vec<usize>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub tau: Vec<f64>,
    pub propensity: Vec<f64>,
    pub eps: Vec<f64>,
    pub zeta: Vec<f64>,
    pub sigma_nbr: Vec<f64>,
    pub gamma0: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma0_nbr: Vec<f64>,
    pub gamma1_nbr: Vec<f64>,
    pub neighbor_sizes: Vec<usize>,
}

impl SemiSyntheticDataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// What a learner may see, plus the true effect for scoring.
    pub fn sample(&self) -> Sample {
        Sample {
            x: self.x_obs.clone(),
            t: self.t.clone(),
            y: self.y.clone(),
            tau: Some(self.tau.clone()),
        }
    }
}

/// Run the full pipeline. Neighborhoods and outcomes use the true covariates;
/// measurement error and masking only affect `x_obs`.
pub fn generate(x: &CovariateMatrix, config: &DgpConfig) -> Result<SemiSyntheticDataset> {
    config.validate()?;
    let s = &config.seeds;
    let d = x.d();
    let coefficients = draw_coefficients(d, s.coeff_seed);
    let nbr = NeighborIndex::build(&x.values, config.radius);
    let (zeta, gamma0, gamma1) = compute_baselines(&x.values, &coefficients);
    let (t, propensity, sigma_nbr) = assign_treatment(&zeta, &nbr, config.xi, s.treat_seed);
    let o = generate_outcomes(
        &gamma0,
        &gamma1,
        &nbr,
        config.theta0,
        config.theta1,
        &t,
        config.outcome_noise_var,
        s.noise_seed,
    );
    let noisy = apply_measurement_error(&x.values, config.omega, d, s.measurement_seed);
    let (x_obs, obs_columns) = mask_confounders(&noisy, config.m, s.mask_seed);
    Ok(SemiSyntheticDataset {
        config: *config,
        coefficients,
        x_true: x.clone(),
        x_obs,
        obs_columns,
        t,
        y: o.y,
        y0: o.y0,
        y1: o.y1,
        tau: o.tau,
        propensity,
        eps: o.eps,
        zeta,
        sigma_nbr,
        gamma0,
        gamma1,
        gamma0_nbr: o.gamma0_nbr,
        gamma1_nbr: o.gamma1_nbr,
        neighbor_sizes: nbr.sizes().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize_covariates;
    use ndarray::array;

    fn one_unit_coeffs(d: usize) -> CoefficientSet {
        CoefficientSet {
            beta_t: vec![0.0; d],
            beta0_lin: vec![0.0; d],
            beta0_quad: Array2::zeros((d, d)),
            beta1_lin: vec![0.0; d],
            beta1_quad: Array2::zeros((d, d)),
            beta1_cubic: Array3::zeros((d, d, d)),
        }
    }

    #[test]
    fn coefficients_are_seeded_and_shaped() {
        let a = draw_coefficients(8, 5);
        assert_eq!(a, draw_coefficients(8, 5));
        assert_eq!(a.beta1_cubic.len(), 512);
        assert!(a
            .beta0_quad
            .iter()
            .chain(a.beta1_cubic.iter())
            .all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn cubic_rate_over_redraws() {
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..10_000u64 {
            let c = draw_coefficients(8, seed);
            total += c.beta1_cubic.sum();
            count += c.beta1_cubic.len();
        }
        let rate = total / count as f64;
        assert!((rate - 0.6).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn beta_t_moments() {
        let mut v = Vec::new();
        for seed in 0..2000u64 {
            v.extend(draw_coefficients(8, seed).beta_t);
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((mean + 0.2).abs() < 0.005, "mean {mean}");
        assert!((var - 0.01).abs() < 0.0005, "var {var}");
    }

    #[test]
    fn baseline_quadratic_example() {
        let mut c = one_unit_coeffs(1);
        c.beta0_lin = vec![1.0];
        c.beta0_quad[[0, 0]] = 1.0;
        let (_, g0, _) = compute_baselines(&array![[0.5]], &c);
        assert_eq!(g0, vec![0.75]);
    }

    #[test]
    fn baseline_cubic_example() {
        let mut c = one_unit_coeffs(2);
        c.beta1_lin = vec![1.0, 0.0];
        c.beta1_quad.fill(1.0);
        c.beta1_cubic.fill(1.0);
        let (_, _, g1) = compute_baselines(&array![[1.0, 1.0]], &c);
        assert_eq!(g1, vec![13.0]);
    }

    #[test]
    fn zero_row_gives_zero_baselines() {
        let c = draw_coefficients(3, 1);
        let (z, g0, g1) = compute_baselines(&Array2::zeros((1, 3)), &c);
        assert_eq!((z[0], g0[0], g1[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rct_propensity_is_half() {
        let x = array![[0.0], [0.5], [1.0]];
        let nbr = NeighborIndex::build(&x, 0.1);
        let (_, p, _) = assign_treatment(&[-1.0, 0.3, 2.0], &nbr, 0.0, 1);
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn isolated_unit_propensity() {
        let x = array![[0.0], [1.0]];
        let nbr = NeighborIndex::build(&x, 0.1);
        let (_, p, sigma) = assign_treatment(&[-0.3, 0.0], &nbr, 2.4, 1);
        assert_eq!(sigma[0], -0.3);
        // logit = 2.4·(−0.3 + 0.2·(−0.3) + 0.3) = −0.144
        let expected = 1.0 / (1.0 + 0.144f64.exp());
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((p[0] - 0.46406).abs() < 1e-5);
    }

    #[test]
    fn rct_treated_fraction_full_scale() {
        let x = synthesize_covariates(64_000, 8, 7, 3).unwrap();
        let nbr = NeighborIndex::build(&x.values, 0.1);
        let c = draw_coefficients(8, 3);
        let (zeta, _, _) = compute_baselines(&x.values, &c);
        let (t, p, _) = assign_treatment(&zeta, &nbr, 0.0, 9);
        assert!(p.iter().all(|&v| v == 0.5));
        let frac = t.iter().sum::<f64>() / t.len() as f64;
        assert!((0.49..=0.51).contains(&frac), "{frac}");
    }

    #[test]
    fn zero_spillover_outcomes_equal_baselines() {
        let x = array![[0.0], [0.05], [1.0]];
        let nbr = NeighborIndex::build(&x, 0.1);
        let g0 = [1.0, 2.0, 3.0];
        let g1 = [4.0, 5.0, 7.0];
        let o = generate_outcomes(&g0, &g1, &nbr, 0.0, 0.0, &[1.0, 0.0, 1.0], 0.1, 2);
        assert_eq!(o.y0, g0.to_vec());
        assert_eq!(o.y1, g1.to_vec());
    }

    #[test]
    fn isolated_unit_spillover() {
        let x = array![[0.0], [1.0]];
        let nbr = NeighborIndex::build(&x, 0.1);
        let o = generate_outcomes(&[0.0, 0.0], &[2.5, 1.0], &nbr, 0.0, 0.8, &[1.0, 1.0], 0.0, 2);
        assert!((o.y1[0] - 1.8 * 2.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_treated_outcome_is_y1() {
        let x = array![[0.0], [1.0]];
        let nbr = NeighborIndex::build(&x, 0.1);
        let o = generate_outcomes(&[1.0, 2.0], &[3.0, 4.0], &nbr, 0.4, 0.8, &[1.0, 0.0], 0.0, 2);
        assert_eq!(o.y[0], o.y1[0]);
        assert_eq!(o.y[1], o.y0[1]);
    }

    #[test]
    fn measurement_error_zero_is_identity() {
        let x = synthesize_covariates(20, 4, 2, 1).unwrap().values;
        assert_eq!(apply_measurement_error(&x, 0.0, 8, 5), x);
        assert_eq!(apply_measurement_error(&x, 1.2, 8, 5), apply_measurement_error(&x, 1.2, 8, 5));
    }

    #[test]
    fn measurement_error_variance() {
        let x = Array2::zeros((125_000, 8));
        let obs = apply_measurement_error(&x, 1.2, 8, 17);
        let n = obs.len() as f64;
        let mean = obs.sum() / n;
        let var = obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 0.15).abs() < 0.003, "var {var}");
    }

    #[test]
    fn masking_column_counts() {
        let x = synthesize_covariates(5, 8, 7, 1).unwrap().values;
        let (o, kept) = mask_confounders(&x, 0.1, 3);
        assert_eq!(o, x);
        assert_eq!(kept.len(), 8);
        assert_eq!(mask_confounders(&x, 0.3, 3).0.ncols(), 6);
        assert_eq!(mask_confounders(&x, 0.5, 3).0.ncols(), 4);
    }

    fn check_invariants(ds: &SemiSyntheticDataset) {
        for i in 0..ds.n() {
            assert_eq!(ds.tau[i], ds.y1[i] - ds.y0[i]);
            let factual = ds.t[i] * ds.y1[i] + (1.0 - ds.t[i]) * ds.y0[i];
            assert!((ds.y[i] - factual - ds.eps[i]).abs() <= 1e-12 * (1.0 + ds.y[i].abs()));
            assert!(ds.propensity[i] > 0.0 && ds.propensity[i] < 1.0);
            assert!(ds.neighbor_sizes[i] >= 1);
        }
        if ds.config.xi == 0.0 {
            assert!(ds.propensity.iter().all(|&p| p == 0.5));
        }
    }

    #[test]
    fn rct_dataset_invariants() {
        let x = synthesize_covariates(500, 8, 7, 2).unwrap();
        let ds = generate(&x, &DgpConfig::rct(DgpSeeds::from_base(1))).unwrap();
        check_invariants(&ds);
        assert_eq!(ds.x_obs, x.values);
        assert_eq!(ds.y0, ds.gamma0);
    }

    #[test]
    fn setting_a_knob_record() {
        let c = DgpConfig::for_setting(Setting::A, 0.8, DgpSeeds::from_base(0));
        assert_eq!((c.xi, c.theta0, c.theta1, c.omega, c.m), (0.8, 0.4, 0.8, 1.2, 0.1));
        let b = DgpConfig::for_setting(Setting::B, 0.5, DgpSeeds::from_base(0));
        assert_eq!((b.xi, b.theta0, b.theta1), (0.0, 0.5, 0.95));
        let x = synthesize_covariates(400, 8, 7, 2).unwrap();
        let ds = generate(&x, &c).unwrap();
        check_invariants(&ds);
        assert_eq!(ds.x_obs.ncols(), 8);
    }

    #[test]
    fn generation_is_deterministic() {
        let x = synthesize_covariates(300, 8, 7, 4).unwrap();
        let c = DgpConfig::for_setting(Setting::D, 0.5, DgpSeeds::from_base(9));
        assert_eq!(generate(&x, &c).unwrap(), generate(&x, &c).unwrap());
    }

    #[test]
    fn invalid_config_rejected() {
        let x = synthesize_covariates(10, 2, 0, 4).unwrap();
        let mut c = DgpConfig::default();
        c.m = 1.0;
        assert!(generate(&x, &c).is_err());
        c.m = 0.0;
        c.radius = 0.0;
        assert!(generate(&x, &c).is_err());
    }

    #[test]
    fn spillover_monotone_in_theta1() {
        let x = synthesize_covariates(400, 3, 2, 8).unwrap();
        let seeds = DgpSeeds::from_base(3);
        let mut lo = DgpConfig::rct(seeds);
        lo.theta1 = 0.5;
        let mut hi = lo;
        hi.theta1 = 0.9;
        let a = generate(&x, &lo).unwrap();
        let b = generate(&x, &hi).unwrap();
        for i in 0..a.n() {
            if a.gamma1_nbr[i] > 0.0 {
                assert!(b.y1[i] >= a.y1[i]);
            } else if a.gamma1_nbr[i] < 0.0 {
                assert!(b.y1[i] <= a.y1[i]);
            }
        }
    }

    #[test]
    fn paired_theta_line() {
        assert_eq!(paired_theta1(0.6), 1.1);
        assert!((paired_theta1(0.7) - 1.25).abs() < 1e-12);
    }
}

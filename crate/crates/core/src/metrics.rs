//! Uplift evaluation metrics over a τ̂-ranked population.
//!
//! Oracle metrics (PEHE_k, ATE_k) need the true effects; practical metrics
//! (Uplift_k, AUUC_k, Qini_k) only use observed treatment and outcome. All of
//! them look at the top N_k = max(1, ⌊n·k⌋) units ranked by τ̂ descending, with
//! ties kept in original index order.
//!
//! Wherever a prefix has no treated or no control unit yet, the missing arm's
//! mean (Uplift, AUUC) or the N^T/N^C ratio (Qini) is taken as 0.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::floor_count;
use crate::error::{arg, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    Pehe,
    Ate,
    Uplift,
    Auuc,
    Qini,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Pehe,
        MetricKind::Ate,
        MetricKind::Uplift,
        MetricKind::Auuc,
        MetricKind::Qini,
    ];
    pub const PRACTICAL: [MetricKind; 3] = [MetricKind::Uplift, MetricKind::Auuc, MetricKind::Qini];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Pehe => "PEHE",
            MetricKind::Ate => "ATE",
            MetricKind::Uplift => "Uplift",
            MetricKind::Auuc => "AUUC",
            MetricKind::Qini => "Qini",
        }
    }

    pub fn parse(s: &str) -> Option<MetricKind> {
        MetricKind::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }

    /// PEHE is an error; every other metric is a gain.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricKind::Pehe)
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Units reordered by predicted effect.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPopulation {
    /// `order[r]` is the original index of the unit at rank r.
    pub order: Vec<usize>,
    /// Predicted effects in ranked order.
    pub tau_hat: Vec<f64>,
    pub tau_true: Option<Vec<f64>>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub k_fraction: f64,
    pub n_k: usize,
}

/// Descending stable order of `scores`; ties (including -0.0 vs 0.0) keep
/// ascending index. Scores must not contain NaN.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

pub fn top_k_count(n: usize, k_fraction: f64) -> usize {
    floor_count(k_fraction, n).max(1)
}

impl RankedPopulation {
    pub fn new(tau_hat: &[f64], tau_true: Option<&[f64]>, t: &[f64], y: &[f64], k_fraction: f64) -> Result<Self> {
        let n = tau_hat.len();
        if t.len() != n || y.len() != n || tau_true.is_some_and(|v| v.len() != n) {
            return arg("rank_population: inputs have different lengths");
        }
        if n == 0 {
            return arg("rank_population: empty population");
        }
        if !(k_fraction > 0.0 && k_fraction <= 1.0) {
            return arg(format!("k fraction must lie in (0, 1], got {k_fraction}"));
        }
        if tau_hat.iter().any(|v| v.is_nan()) {
            return arg("rank_population: predicted effects contain NaN");
        }
        let order = descending_order(tau_hat);
        let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Ok(RankedPopulation {
            tau_hat: pick(tau_hat),
            tau_true: tau_true.map(pick),
            t: pick(t),
            y: pick(y),
            n_k: top_k_count(n, k_fraction),
            order,
            k_fraction,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn tau_true(&self) -> Result<&[f64]> {
        self.tau_true
            .as_deref()
            .ok_or_else(|| Error::Argument("oracle metric requires true effects".into()))
    }
}

/// Cumulative arm counts and outcome sums along the ranking. Entry `i - 1`
/// describes the prefix of the first i units.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixCounts {
    pub n_t: Vec<usize>,
    pub n_c: Vec<usize>,
    pub s_t: Vec<f64>,
    pub s_c: Vec<f64>,
}

impl PrefixCounts {
    pub fn len(&self) -> usize {
        self.n_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_t.is_empty()
    }

    /// Arm-mean difference of the first i units (1-based), empty arm mean 0.
    fn mean_gap(&self, i: usize) -> f64 {
        let (nt, nc) = (self.n_t[i - 1], self.n_c[i - 1]);
        let mt = if nt > 0 { self.s_t[i - 1] / nt as f64 } else { 0.0 };
        let mc = if nc > 0 { self.s_c[i - 1] / nc as f64 } else { 0.0 };
        mt - mc
    }

    /// Uplift-curve value V^UC_i.
    pub fn uplift_curve(&self, i: usize) -> f64 {
        self.mean_gap(i) * (self.n_t[i - 1] + self.n_c[i - 1]) as f64
    }

    /// Qini-curve value V^QC_i.
    pub fn qini_curve(&self, i: usize) -> f64 {
        let nc = self.n_c[i - 1];
        let ratio = if nc > 0 { self.n_t[i - 1] as f64 / nc as f64 } else { 0.0 };
        self.s_t[i - 1] - self.s_c[i - 1] * ratio
    }
}

pub fn build_prefix_counts(t: &[f64], y: &[f64]) -> PrefixCounts {
    let n = t.len();
    let mut pc = PrefixCounts {
        n_t: Vec::with_capacity(n),
        n_c: Vec::with_capacity(n),
        s_t: Vec::with_capacity(n),
        s_c: Vec::with_capacity(n),
    };
    let (mut nt, mut nc, mut st, mut sc) = (0usize, 0usize, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        if ti == 1.0 {
            nt += 1;
            st += yi;
        } else {
            nc += 1;
            sc += yi;
        }
        pc.n_t.push(nt);
        pc.n_c.push(nc);
        pc.s_t.push(st);
        pc.s_c.push(sc);
    }
    pc
}

impl RankedPopulation {
    pub fn prefix_counts(&self) -> PrefixCounts {
        build_prefix_counts(&self.t, &self.y)
    }
}

/// Root mean squared effect error over the top N_k units.
pub fn pehe_at_k(rp: &RankedPopulation) -> Result<f64> {
    let tau = rp.tau_true()?;
    let sq: f64 = rp.tau_hat[..rp.n_k]
        .iter()
        .zip(&tau[..rp.n_k])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / rp.n_k as f64).sqrt())
}

/// Mean true effect over the top N_k units.
pub fn ate_at_k(rp: &RankedPopulation) -> Result<f64> {
    let tau = rp.tau_true()?;
    Ok(tau[..rp.n_k].iter().sum::<f64>() / rp.n_k as f64)
}

pub fn uplift_at_k(pc: &PrefixCounts, n_k: usize) -> f64 {
    pc.mean_gap(n_k)
}

fn trapezoid(n_k: usize, f: impl Fn(usize) -> f64) -> f64 {
    (1..n_k).map(|i| (f(i) + f(i + 1)) / 2.0).sum()
}

/// Trapezoid area under the uplift curve up to N_k, divided by N_k.
pub fn auuc_at_k(pc: &PrefixCounts, n_k: usize) -> f64 {
    trapezoid(n_k, |i| pc.uplift_curve(i)) / n_k as f64
}

/// How the random-targeting Qini curve is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QiniBaseline {
    /// Straight line from the origin to the whole-sample Qini value.
    #[default]
    Diagonal,
    /// Mean area over seeded random orderings of the population.
    Permutations { count: usize, seed: u64 },
}

/// Model Qini area minus the analytic diagonal's area, divided by N_k.
pub fn qini_at_k(pc: &PrefixCounts, n_k: usize) -> f64 {
    let n = pc.len();
    let full = pc.qini_curve(n);
    let model = trapezoid(n_k, |i| pc.qini_curve(i));
    let random = trapezoid(n_k, |i| i as f64 / n as f64 * full);
    (model - random) / n_k as f64
}

/// Qini with a chosen baseline; `Diagonal` equals [`qini_at_k`].
pub fn qini_with_baseline(rp: &RankedPopulation, baseline: QiniBaseline) -> f64 {
    let pc = rp.prefix_counts();
    match baseline {
        QiniBaseline::Diagonal | QiniBaseline::Permutations { count: 0, .. } => qini_at_k(&pc, rp.n_k),
        QiniBaseline::Permutations { count, seed } => {
            let model = trapezoid(rp.n_k, |i| pc.qini_curve(i));
            let mut s = rng::stream(seed, "qini-permutations");
            let mut idx: Vec<usize> = (0..rp.len()).collect();
            let mut total = 0.0;
            for _ in 0..count {
                idx.shuffle(&mut s);
                let t: Vec<f64> = idx.iter().map(|&i| rp.t[i]).collect();
                let y: Vec<f64> = idx.iter().map(|&i| rp.y[i]).collect();
                let rpc = build_prefix_counts(&t, &y);
                total += trapezoid(rp.n_k, |i| rpc.qini_curve(i));
            }
            (model - total / count as f64) / rp.n_k as f64
        }
    }
}

/// All five metrics at one targeting fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k_fraction: f64,
    pub n_k: usize,
    pub pehe: Option<f64>,
    pub ate: Option<f64>,
    pub uplift: f64,
    pub auuc: f64,
    pub qini: f64,
}

impl MetricReport {
    pub fn get(&self, metric: MetricKind) -> Option<f64> {
        match metric {
            MetricKind::Pehe => self.pehe,
            MetricKind::Ate => self.ate,
            MetricKind::Uplift => Some(self.uplift),
            MetricKind::Auuc => Some(self.auuc),
            MetricKind::Qini => Some(self.qini),
        }
    }
}

pub fn evaluate(
    tau_hat: &[f64],
    tau_true: Option<&[f64]>,
    t: &[f64],
    y: &[f64],
    k_fraction: f64,
    baseline: QiniBaseline,
) -> Result<MetricReport> {
    let rp = RankedPopulation::new(tau_hat, tau_true, t, y, k_fraction)?;
    let pc = rp.prefix_counts();
    let (pehe, ate) = match tau_true {
        Some(_) => (Some(pehe_at_k(&rp)?), Some(ate_at_k(&rp)?)),
        None => (None, None),
    };
    Ok(MetricReport {
        k_fraction,
        n_k: rp.n_k,
        pehe,
        ate,
        uplift: uplift_at_k(&pc, rp.n_k),
        auuc: auuc_at_k(&pc, rp.n_k),
        qini: match baseline {
            QiniBaseline::Diagonal => qini_at_k(&pc, rp.n_k),
            other => qini_with_baseline(&rp, other),
        },
    })
}

/// Average (mid) ranks, 1-based.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share the mean of ranks i+1..=j.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman correlation as the Pearson correlation of mid-ranks. Returns
/// `Ok(None)` when either input has no rank variance.
pub fn spearman_rank_corr(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() || a.len() < 2 {
        return arg(format!("spearman needs equal lengths >= 2, got {} and {}", a.len(), b.len()));
    }
    let ra = mid_ranks(a);
    let rb = mid_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(None);
    }
    Ok(Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ranked(tau_hat: &[f64], t: &[f64], y: &[f64], k: f64) -> RankedPopulation {
        RankedPopulation::new(tau_hat, None, t, y, k).unwrap()
    }

    #[test]
    fn ranking_order_and_ties() {
        assert_eq!(ranked(&[3.0, 1.0, 2.0], &[0.0; 3], &[0.0; 3], 1.0).order, vec![0, 2, 1]);
        assert_eq!(ranked(&[1.0; 4], &[0.0; 4], &[0.0; 4], 1.0).order, vec![0, 1, 2, 3]);
        assert_eq!(ranked(&[0.0; 10], &[0.0; 10], &[0.0; 10], 0.3).n_k, 3);
        assert_eq!(ranked(&[0.0; 3], &[0.0; 3], &[0.0; 3], 0.1).n_k, 1);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(RankedPopulation::new(&[1.0, 2.0], None, &[1.0], &[1.0, 2.0], 0.5).is_err());
        assert!(RankedPopulation::new(&[1.0], None, &[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn pehe_examples() {
        let rp = RankedPopulation::new(&[2.0, 1.0], Some(&[2.0, 1.0]), &[1.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(pehe_at_k(&rp).unwrap(), 0.0);
        let rp = RankedPopulation::new(&[5.0, 4.0, 0.0], Some(&[4.0, 2.0, 9.0]), &[1.0; 3], &[0.0; 3], 0.67).unwrap();
        assert_eq!(rp.n_k, 2);
        assert!((pehe_at_k(&rp).unwrap() - 1.5811388300841898).abs() < 1e-12);
        // Units below rank N_k do not matter.
        let rp2 = RankedPopulation::new(
            &[5.0, 4.0, 0.0, -1.0, -2.0, -3.0],
            Some(&[4.0, 2.0, 9.0, 100.0, 50.0, 7.0]),
            &[1.0; 6],
            &[0.0; 6],
            0.34,
        )
        .unwrap();
        assert_eq!(rp2.n_k, 2);
        assert_eq!(pehe_at_k(&rp2).unwrap(), pehe_at_k(&rp).unwrap());
    }

    #[test]
    fn oracle_metrics_need_truth() {
        let rp = ranked(&[1.0, 2.0], &[1.0, 0.0], &[0.0, 1.0], 1.0);
        assert!(pehe_at_k(&rp).is_err());
        assert!(ate_at_k(&rp).is_err());
    }

    #[test]
    fn ate_examples() {
        let rp = RankedPopulation::new(&[0.5; 4], Some(&[3.0; 4]), &[1.0; 4], &[0.0; 4], 0.5).unwrap();
        assert_eq!(ate_at_k(&rp).unwrap(), 3.0);
        let rp = RankedPopulation::new(&[9.0, 1.0, 2.0, 3.0], Some(&[5.0, 1.0, 1.0, 1.0]), &[1.0; 4], &[0.0; 4], 0.25).unwrap();
        assert_eq!(ate_at_k(&rp).unwrap(), 5.0);
    }

    #[test]
    fn prefix_counts_example() {
        let pc = build_prefix_counts(&[1.0, 0.0, 1.0], &[1.0, 2.0, 3.0]);
        assert_eq!(pc.n_t, vec![1, 1, 2]);
        assert_eq!(pc.n_c, vec![0, 1, 1]);
        assert_eq!(pc.s_t, vec![1.0, 1.0, 4.0]);
        assert_eq!(pc.s_c, vec![0.0, 2.0, 2.0]);
        let all_t = build_prefix_counts(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]);
        assert!(all_t.n_c.iter().all(|&c| c == 0) && all_t.s_c.iter().all(|&s| s == 0.0));
        assert_eq!(all_t.s_t[3], 10.0);
    }

    #[test]
    fn uplift_examples() {
        // Top-4: treated {1, 0}, control {0, 0}.
        let pc = build_prefix_counts(&[1.0, 0.0, 1.0, 0.0], &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(uplift_at_k(&pc, 4), 0.5);
        let pc = build_prefix_counts(&[1.0, 0.0, 1.0, 0.0], &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(uplift_at_k(&pc, 4), 0.0);
        let pc = build_prefix_counts(&[1.0, 1.0], &[0.7, 0.7]);
        assert!((uplift_at_k(&pc, 2) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn auuc_examples() {
        let pc = build_prefix_counts(&[1.0, 0.0, 1.0], &[0.0; 3]);
        assert_eq!(auuc_at_k(&pc, 3), 0.0);
        let pc = build_prefix_counts(&[1.0, 0.0], &[1.0, 0.0]);
        assert_eq!(auuc_at_k(&pc, 2), 0.75);
        assert_eq!(auuc_at_k(&pc, 1), 0.0);
    }

    #[test]
    fn qini_examples() {
        let pc = build_prefix_counts(&[1.0, 0.0, 1.0, 0.0], &[0.0; 4]);
        assert_eq!(qini_at_k(&pc, 4), 0.0);
        // All treated: the model curve is the diagonal itself.
        let pc = build_prefix_counts(&[1.0; 5], &[2.0; 5]);
        assert!(qini_at_k(&pc, 5).abs() < 1e-12);
        assert!(qini_at_k(&pc, 3).abs() < 1e-12);
    }

    #[test]
    fn whole_population_uplift_is_arm_difference() {
        let mut r = rng::stream(5, "t");
        let n = 50;
        let t: Vec<f64> = (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let th: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let rep = evaluate(&th, None, &t, &y, 1.0, QiniBaseline::Diagonal).unwrap();
        let mt = (0..n).filter(|&i| t[i] == 1.0).map(|i| y[i]).sum::<f64>() / t.iter().sum::<f64>();
        let mc = (0..n).filter(|&i| t[i] == 0.0).map(|i| y[i]).sum::<f64>() / (n as f64 - t.iter().sum::<f64>());
        assert!((rep.uplift - (mt - mc)).abs() < 1e-12);
    }

    #[test]
    fn rank_only_dependence() {
        let mut r = rng::stream(6, "t");
        let n = 80;
        let th: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
        let tau: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let t: Vec<f64> = (0..n).map(|_| (r.random::<f64>() < 0.5) as u8 as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let moved: Vec<f64> = th.iter().map(|v| 3.0 * v + 7.0).collect();
        for k in [0.1, 0.3, 0.5, 0.7] {
            let a = evaluate(&th, Some(&tau), &t, &y, k, QiniBaseline::Diagonal).unwrap();
            let b = evaluate(&moved, Some(&tau), &t, &y, k, QiniBaseline::Diagonal).unwrap();
            assert_eq!((a.uplift, a.auuc, a.qini, a.ate), (b.uplift, b.auuc, b.qini, b.ate));
            assert_ne!(a.pehe, b.pehe);
        }
    }

    #[test]
    fn permutation_baseline_approaches_diagonal() {
        let mut r = rng::stream(8, "t");
        let n = 200;
        let th: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let t: Vec<f64> = (0..n).map(|_| (r.random::<f64>() < 0.5) as u8 as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| t[i] * th[i] + r.random::<f64>()).collect();
        let rp = RankedPopulation::new(&th, None, &t, &y, 1.0).unwrap();
        let diag = qini_with_baseline(&rp, QiniBaseline::Diagonal);
        let perm = qini_with_baseline(&rp, QiniBaseline::Permutations { count: 400, seed: 1 });
        assert!((diag - perm).abs() < 0.05 * diag.abs().max(1.0), "{diag} vs {perm}");
        assert_eq!(qini_with_baseline(&rp, QiniBaseline::Permutations { count: 0, seed: 1 }), diag);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman_rank_corr(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), Some(1.0));
        assert_eq!(spearman_rank_corr(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        let rho = spearman_rank_corr(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap().unwrap();
        assert!((rho - 0.5).abs() < 1e-12);
        assert_eq!(spearman_rank_corr(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert!(spearman_rank_corr(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mid_ranks_with_ties() {
        assert_eq!(mid_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(MetricKind::parse(m.name()), Some(m));
        }
        assert!(!MetricKind::Pehe.higher_is_better());
        assert!(MetricKind::Qini.higher_is_better());
    }
}

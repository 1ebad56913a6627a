//! Limit constants `μ`, `ν`, `Φ`, `Θ` by Monte Carlo, retention exponents,
//! asymptotic moment predictions and regime diagnostics.
//!
//! Every constant is `outer · inner / divisor` where
//! `outer = ∫_A f^m` over the anchor point (estimated as `E_{x~f}[f(x)^{m-1} 1_A(x)]`)
//! and `inner` integrates a scale-one face indicator over the remaining
//! `m - 1` points relative to an anchor at the origin. Every indicator used
//! here forces those points into the closed unit ball, so `inner` is sampled
//! uniformly from `B(0,1)^{m-1}`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{Flavor, RhoVector};
use crate::error::{config, input, Result};
use crate::geometry::{dist2, RegionSpec};
use crate::meb::min_enclosing_ball_radius;
use crate::point_process::{Density, Sampler};
use crate::rng::{self, StreamRng};
use crate::stats::RunningStats;

/// Shard count for Monte Carlo runs; fixed so results do not depend on thread count.
pub const MC_SHARDS: u64 = 32;

pub fn binomial(a: u64, b: u64) -> u64 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    (0..b).fold(1u64, |acc, i| acc * (a - i) / (i + 1))
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Exponent of `p_i` in the joint survival probability of a `k`-face and an
/// `l`-face sharing `j` vertices: `C(k+1,i+1) + C(l+1,i+1) − C(j,i+1)`.
pub fn retention_exponent(k: i64, l: i64, j: i64, i: i64) -> Result<u64> {
    if k < 0 || l < 0 || j < 0 || i < 0 {
        return input(format!("retention exponent needs nonnegative arguments, got k={k} l={l} j={j} i={i}"));
    }
    if j > k.min(l) + 1 {
        return input(format!("faces of dimensions {k} and {l} cannot share {j} vertices"));
    }
    if i < 1 || i > k.max(l).max(1) {
        return input(format!("retention index i={i} outside 1..={}", k.max(l).max(1)));
    }
    let (k, l, j, i) = (k as u64, l as u64, j as u64, i as u64);
    Ok(binomial(k + 1, i + 1) + binomial(l + 1, i + 1) - binomial(j, i + 1))
}

/// `ln ∏_{i=1..k} p_i^{C(k+1,i+1)}`; `-inf` when a needed `p_i` is zero.
pub fn log_retention(rho: &RhoVector, k: usize) -> Result<f64> {
    if rho.len() < k {
        return config(format!("rho has {} entries, dimension {k} needs {k}", rho.len()));
    }
    Ok((1..=k).map(|i| weighted_ln(rho.p(i), binomial(k as u64 + 1, i as u64 + 1))).sum())
}

fn weighted_ln(p: f64, exponent: u64) -> f64 {
    if exponent == 0 {
        0.0
    } else {
        exponent as f64 * p.ln()
    }
}

/// Survival probability of a fixed admissible `k`-face: `∏ p_i^{C(k+1,i+1)}`.
pub fn face_retention(rho: &RhoVector, k: usize) -> Result<f64> {
    Ok(log_retention(rho, k)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantKind {
    Mu,
    Nu,
    Phi,
    Theta,
}

impl ConstantKind {
    fn flavor(self) -> Flavor {
        match self {
            ConstantKind::Mu | ConstantKind::Phi => Flavor::Rips,
            ConstantKind::Nu | ConstantKind::Theta => Flavor::Cech,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub kind: ConstantKind,
    pub k: usize,
    pub l: Option<usize>,
    pub j: Option<usize>,
    pub region: RegionSpec,
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

fn sample_unit_ball(rng: &mut StreamRng, sampler: &mut Sampler, d: usize, out: &mut [f64]) {
    if d <= 4 {
        loop {
            let mut r2 = 0.0;
            for v in out.iter_mut() {
                *v = 2.0 * rng.random::<f64>() - 1.0;
                r2 += *v * *v;
            }
            if r2 <= 1.0 {
                return;
            }
        }
    }
    let mut r2 = 0.0;
    for v in out.iter_mut() {
        *v = sampler.standard_normal(rng);
        r2 += *v * *v;
    }
    let scale = rng.random::<f64>().powf(1.0 / d as f64) / r2.sqrt();
    for v in out.iter_mut() {
        *v *= scale;
    }
}

/// Shape of the configuration whose indicator is integrated.
#[derive(Debug, Clone, Copy)]
struct Shape {
    kind: ConstantKind,
    k: usize,
    /// Second face dimension and overlap, for `Φ`/`Θ`.
    pair: Option<(usize, usize)>,
}

impl Shape {
    fn points(&self) -> usize {
        match self.pair {
            None => self.k + 1,
            Some((l, j)) => self.k + l + 2 - j,
        }
    }

    fn divisor(&self) -> f64 {
        match self.pair {
            None => factorial(self.k as u64 + 1),
            Some((l, j)) => {
                factorial(j as u64) * factorial((self.k + 1 - j) as u64) * factorial((l + 1 - j) as u64)
            }
        }
    }

    /// `pts[0]` is the origin anchor.
    fn indicator(&self, pts: &[&[f64]], scratch: &mut Vec<usize>) -> bool {
        let face_ok = |idx: &[usize]| -> bool {
            match self.kind.flavor() {
                Flavor::Rips => {
                    for (a, &u) in idx.iter().enumerate() {
                        for &v in &idx[a + 1..] {
                            if dist2(pts[u], pts[v]) > 1.0 {
                                return false;
                            }
                        }
                    }
                    true
                }
                Flavor::Cech => {
                    let sub: Vec<&[f64]> = idx.iter().map(|&i| pts[i]).collect();
                    min_enclosing_ball_radius(&sub) <= 0.5
                }
            }
        };
        scratch.clear();
        scratch.extend(0..=self.k);
        if !face_ok(scratch) {
            return false;
        }
        if let Some((_, j)) = self.pair {
            scratch.clear();
            scratch.extend(0..j);
            scratch.extend(self.k + 1..pts.len());
            return face_ok(scratch);
        }
        true
    }
}

fn estimate(shape: Shape, d: usize, density: &Density, region: &RegionSpec, samples: u64, seed: u64) -> Result<ConstantEstimate> {
    if d == 0 || density.dim() != d {
        return input(format!("dimension {d} does not match density dimension {}", density.dim()));
    }
    if samples == 0 {
        return input("need at least one Monte Carlo sample");
    }
    region.check_dim(d)?;
    let m = shape.points();

    let (outer, outer_se) = if m == 1 {
        (density.power_integral(1, region)?, 0.0)
    } else {
        let stats = sharded(samples, seed, 0, |rng, count| {
            let mut sampler = Sampler::new(density);
            let mut x = Vec::with_capacity(d);
            let mut acc = RunningStats::new();
            for _ in 0..count {
                x.clear();
                density.sample_into(rng, &mut sampler, &mut x);
                let v = if region.contains(&x) { density.eval_unchecked(&x).powi(m as i32 - 1) } else { 0.0 };
                acc.push(v);
            }
            acc
        });
        (stats.mean(), stats.stderr())
    };

    let (inner, inner_se) = if m == 1 {
        (1.0, 0.0)
    } else {
        let others = m - 1;
        let stats = sharded(samples, seed, 1, |rng, count| {
            let mut sampler = Sampler::new(density);
            let mut buf = vec![0.0; m * d];
            let mut scratch = Vec::with_capacity(m);
            let mut acc = RunningStats::new();
            for _ in 0..count {
                for p in 0..others {
                    sample_unit_ball(rng, &mut sampler, d, &mut buf[(p + 1) * d..(p + 2) * d]);
                }
                let pts: Vec<&[f64]> = buf.chunks_exact(d).collect();
                acc.push(if shape.indicator(&pts, &mut scratch) { 1.0 } else { 0.0 });
            }
            acc
        });
        let vol = unit_ball_volume(d).powi(others as i32);
        (vol * stats.mean(), vol * stats.stderr())
    };

    let div = shape.divisor();
    let value = outer * inner / div;
    let stderr = (inner * inner * outer_se * outer_se + outer * outer * inner_se * inner_se).sqrt() / div;
    Ok(ConstantEstimate {
        value,
        stderr,
        samples,
        kind: shape.kind,
        k: shape.k,
        l: shape.pair.map(|p| p.0),
        j: shape.pair.map(|p| p.1),
        region: region.clone(),
    })
}

/// Runs `body` over `MC_SHARDS` independent streams and merges in shard order.
fn sharded<F>(samples: u64, seed: u64, lane: u64, body: F) -> RunningStats
where
    F: Fn(&mut StreamRng, u64) -> RunningStats + Sync,
{
    let shards = MC_SHARDS.min(samples);
    let parts: Vec<RunningStats> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let count = samples / shards + u64::from(s < samples % shards);
            let mut rng = rng::stream(rng::derive_seed(seed, 2 * s + lane));
            body(&mut rng, count)
        })
        .collect();
    parts.iter().fold(RunningStats::new(), |mut acc, p| {
        acc.merge(p);
        acc
    })
}

/// `μ` for Rips `k`-faces.
pub fn estimate_mu(k: usize, d: usize, density: &Density, region: &RegionSpec, samples: u64, seed: u64) -> Result<ConstantEstimate> {
    estimate(Shape { kind: ConstantKind::Mu, k, pair: None }, d, density, region, samples, seed)
}

/// `ν` for Čech `k`-faces.
pub fn estimate_nu(k: usize, d: usize, density: &Density, region: &RegionSpec, samples: u64, seed: u64) -> Result<ConstantEstimate> {
    estimate(Shape { kind: ConstantKind::Nu, k, pair: None }, d, density, region, samples, seed)
}

fn check_overlap(k: usize, l: usize, j: usize) -> Result<()> {
    if j < 1 || j > k.min(l) + 1 {
        return input(format!("overlap j={j} outside 1..={} for k={k}, l={l}", k.min(l) + 1));
    }
    Ok(())
}

/// `Φ_j(f_k, f_l)`: a Rips `k`-face and `l`-face sharing `j` vertices.
#[allow(clippy::too_many_arguments)]
pub fn estimate_phi(
    k: usize,
    l: usize,
    j: usize,
    d: usize,
    density: &Density,
    region: &RegionSpec,
    samples: u64,
    seed: u64,
) -> Result<ConstantEstimate> {
    check_overlap(k, l, j)?;
    estimate(Shape { kind: ConstantKind::Phi, k, pair: Some((l, j)) }, d, density, region, samples, seed)
}

/// `Θ_j(f_k, f_l)`: the Čech analogue of [`estimate_phi`].
#[allow(clippy::too_many_arguments)]
pub fn estimate_theta(
    k: usize,
    l: usize,
    j: usize,
    d: usize,
    density: &Density,
    region: &RegionSpec,
    samples: u64,
    seed: u64,
) -> Result<ConstantEstimate> {
    check_overlap(k, l, j)?;
    estimate(Shape { kind: ConstantKind::Theta, k, pair: Some((l, j)) }, d, density, region, samples, seed)
}

/// Collection of estimates looked up by `(kind, k, l, j)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub estimates: Vec<ConstantEstimate>,
}

impl ConstantSet {
    pub fn new(estimates: Vec<ConstantEstimate>) -> Self {
        ConstantSet { estimates }
    }

    pub fn get(&self, kind: ConstantKind, k: usize, l: Option<usize>, j: Option<usize>) -> Result<&ConstantEstimate> {
        self.estimates
            .iter()
            .find(|e| e.kind == kind && e.k == k && e.l == l && e.j == j)
            .ok_or_else(|| crate::Error::Config(format!("missing constant {kind:?} k={k} l={l:?} j={j:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedMoments {
    pub mean_k: f64,
    pub var_k: f64,
    pub cov_kl: Option<f64>,
}

fn scaled(log_scale: f64, constant: f64) -> f64 {
    if constant == 0.0 || log_scale == f64::NEG_INFINITY {
        0.0
    } else {
        (log_scale + constant.ln()).exp()
    }
}

/// Asymptotic mean and variance of `f_k`, and optionally `cov(f_k, f_l)`.
///
/// Mean and variance are `∏ p_i^{C(k+1,i+1)} · c_{k} · n^{k+1} r^{dk}` with
/// `c_k = μ` (Rips) or `ν` (Čech). The covariance is the full sum over
/// overlaps `j = 1..=min(k,l)+1` with `Φ_j` or `Θ_j`.
pub fn predicted_moments(
    n: f64,
    r: f64,
    d: usize,
    rho: &RhoVector,
    flavor: Flavor,
    k: usize,
    l: Option<usize>,
    constants: &ConstantSet,
) -> Result<PredictedMoments> {
    let (single, pair) = match flavor {
        Flavor::Rips => (ConstantKind::Mu, ConstantKind::Phi),
        Flavor::Cech => (ConstantKind::Nu, ConstantKind::Theta),
    };
    let (ln_n, ln_r, df) = (n.ln(), r.ln(), d as f64);
    let c = constants.get(single, k, None, None)?.value;
    let log_scale = log_retention(rho, k)? + (k as f64 + 1.0) * ln_n + df * k as f64 * ln_r;
    let mean_k = scaled(log_scale, c);
    let cov_kl = match l {
        None => None,
        Some(l) => {
            let top = k.max(l);
            if rho.len() < top {
                return config(format!("rho has {} entries, covariance needs {top}", rho.len()));
            }
            let mut total = 0.0;
            for j in 1..=k.min(l) + 1 {
                let phi = constants.get(pair, k, Some(l), Some(j))?.value;
                let mut log_term = (k + l + 2 - j) as f64 * ln_n + df * (k + l + 1 - j) as f64 * ln_r;
                for i in 1..=top {
                    let e = retention_exponent(k as i64, l as i64, j as i64, i as i64)?;
                    log_term += weighted_ln(rho.p(i), e);
                }
                total += scaled(log_term, phi);
            }
            Some(total)
        }
    };
    Ok(PredictedMoments { mean_k, var_k: mean_k, cov_kl })
}

/// Which CLT hypothesis set to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeMode {
    Fk(usize),
    Chi(usize),
}

/// Finite-size stand-ins for the limits `nr^d → 0`, growth `→ ∞`, and (for χ) vanishing `→ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub sparse_max: f64,
    pub growth_min: f64,
    pub vanishing_max: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds { sparse_max: 0.3, growth_min: 100.0, vanishing_max: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub n: f64,
    pub r: f64,
    pub d: usize,
    pub rho: RhoVector,
    pub mode: RegimeMode,
    pub thresholds: RegimeThresholds,
    /// `n r^d`.
    pub sparsity: f64,
    /// `∏ p_i^{C(k+1,i+1)} n^{k+1} r^{dk}` (k, or l for χ).
    pub growth: f64,
    pub log10_growth: f64,
    /// χ only: the dimension-`l+1` analogue, which must vanish.
    pub vanishing: Option<f64>,
    pub sparse_ok: bool,
    pub growth_ok: bool,
    pub vanishing_ok: Option<bool>,
    pub pass: bool,
}

fn log_growth(n: f64, r: f64, d: usize, rho: &RhoVector, k: usize) -> Result<f64> {
    Ok(log_retention(rho, k)? + (k as f64 + 1.0) * n.ln() + (d * k) as f64 * r.ln())
}

pub fn regime_check(n: f64, r: f64, d: usize, rho: &RhoVector, mode: RegimeMode, thresholds: RegimeThresholds) -> Result<RegimeReport> {
    if !(n > 0.0 && r > 0.0 && d > 0) {
        return input(format!("regime check needs n > 0, r > 0, d > 0 (got n={n}, r={r}, d={d})"));
    }
    let sparsity = (n.ln() + d as f64 * r.ln()).exp();
    let (lg, vanishing) = match mode {
        RegimeMode::Fk(k) => (log_growth(n, r, d, rho, k)?, None),
        RegimeMode::Chi(l) => (log_growth(n, r, d, rho, l)?, Some(log_growth(n, r, d, rho, l + 1)?.exp())),
    };
    let growth = lg.exp();
    let sparse_ok = sparsity < thresholds.sparse_max;
    let growth_ok = growth > thresholds.growth_min;
    let vanishing_ok = vanishing.map(|v| v < thresholds.vanishing_max);
    Ok(RegimeReport {
        n,
        r,
        d,
        rho: rho.clone(),
        mode,
        thresholds,
        sparsity,
        growth,
        log10_growth: lg / std::f64::consts::LN_10,
        vanishing,
        sparse_ok,
        growth_ok,
        vanishing_ok,
        pass: sparse_ok && growth_ok && vanishing_ok.unwrap_or(true),
    })
}

/// Upper bound on `E f_k` used by the memory guard:
/// `min(C(n,k+1), ∏ p_i^{…} ‖f‖^k θ_d^k n^{k+1} r^{dk} / (k+1)!)`.
pub fn face_count_bound(n: f64, r: f64, d: usize, sup_norm: f64, rho: &RhoVector, k: usize) -> f64 {
    let kf = k as f64;
    let ln_geo = (kf + 1.0) * n.ln() + d as f64 * kf * r.ln() + kf * (sup_norm * unit_ball_volume(d)).ln()
        - factorial(k as u64 + 1).ln();
    let ln_rho = log_retention(rho, k).unwrap_or(0.0);
    let mut choose = 1.0f64;
    for i in 0..=k {
        choose *= (n - i as f64).max(0.0) / (i as f64 + 1.0);
    }
    (ln_geo + ln_rho).exp().min(choose)
}

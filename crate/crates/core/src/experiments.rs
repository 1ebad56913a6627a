//! Replicated end-to-end simulations and their CLT / variance diagnostics.

use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::complex::{build_cech_from_graph, build_rips, euler_characteristic, face_counts, soft_thin, Flavor, RhoVector};
use crate::constants::{
    estimate_mu, estimate_nu, face_count_bound, predicted_moments, regime_check, ConstantSet, RegimeMode,
    RegimeReport, RegimeThresholds,
};
use crate::error::{config, Error, Result};
use crate::geometry::{build_graph, RegionSpec};
use crate::point_process::{sample_binomial, sample_poisson, Density, PointCloud};
use crate::rng::derive_seed;
use crate::stats::{self, ks_critical_1pct, ks_statistic, moment_diagnostics, normalize, MomentDiagnostics, Normalization};

/// Default cap on the expected total face count of one replication.
pub const DEFAULT_MAX_EXPECTED_FACES: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Binomial,
    Poisson,
}

/// `r` given directly, or through `r^d = n^{-a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusRule {
    Explicit(f64),
    Exponent(f64),
}

/// Retention vector given directly, or through `p_i = n^{-b_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoRule {
    Explicit(Vec<f64>),
    Exponents(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Fk(usize),
    #[default]
    Chi,
}

fn default_k_max() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Flavor,
    pub process: ProcessKind,
    /// `n` for the binomial process, `λ` for the Poisson process.
    pub n: f64,
    pub d: usize,
    /// Defaults to the uniform density on `[0,1]^d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Density>,
    pub r: RadiusRule,
    /// Defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoRule>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub region: RegionSpec,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_expected_faces: Option<f64>,
}

/// Concrete parameters after evaluating the rules in an [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub density: Density,
    pub r: f64,
    pub rho: RhoVector,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.replications < 2 {
            return config(format!("need at least 2 replications, got {}", self.replications));
        }
        if !(self.n.is_finite() && self.n > 0.0) {
            return config(format!("n must be positive, got {}", self.n));
        }
        if self.process == ProcessKind::Binomial && (self.n.fract() != 0.0 || self.n < 1.0) {
            return config(format!("binomial process needs an integer n >= 1, got {}", self.n));
        }
        if self.d == 0 {
            return config("dimension must be positive");
        }
        if self.k_max > 12 {
            return config(format!("k_max = {} exceeds the supported cap of 12", self.k_max));
        }
        if let Statistic::Fk(k) = self.statistic {
            if k > self.k_max {
                return config(format!("statistic f_{k} is above k_max = {}", self.k_max));
            }
        }
        let density = match &self.density {
            Some(f) => f.clone(),
            None => Density::unit_cube(self.d)?,
        };
        if density.dim() != self.d {
            return config(format!("density has dimension {} but d = {}", density.dim(), self.d));
        }
        self.region.check_dim(self.d).map_err(|e| Error::Config(e.to_string()))?;
        let r = match self.r {
            RadiusRule::Explicit(r) => r,
            RadiusRule::Exponent(a) => self.n.powf(-a / self.d as f64),
        };
        if !(r.is_finite() && r > 0.0) {
            return config(format!("radius rule gives r = {r}"));
        }
        let rho = match &self.rho {
            None => RhoVector::ones(self.k_max),
            Some(RhoRule::Explicit(p)) => RhoVector::new(p.clone())?,
            Some(RhoRule::Exponents(b)) => RhoVector::new(b.iter().map(|b| self.n.powf(-b)).collect())?,
        };
        if rho.len() < self.k_max {
            return config(format!("rho has {} entries but k_max = {}", rho.len(), self.k_max));
        }
        Ok(Resolved { density, r, rho })
    }

    fn flavor(&self) -> Flavor {
        self.model
    }
}

/// One replication's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub rep: usize,
    /// Face counts in the configured region, dimensions `0..=k_max`.
    pub f: Vec<u64>,
    pub chi: i64,
    pub n_points: usize,
    pub seconds: Option<f64>,
}

/// Refuses configurations whose expected face count would not fit the cap.
pub fn memory_guard(cfg: &ExperimentConfig, resolved: &Resolved) -> Result<f64> {
    let cap = cfg.max_expected_faces.unwrap_or(DEFAULT_MAX_EXPECTED_FACES);
    let n_eff = match cfg.process {
        ProcessKind::Binomial => cfg.n,
        ProcessKind::Poisson => cfg.n + 6.0 * cfg.n.sqrt() + 6.0,
    };
    let sup = resolved.density.sup_norm();
    let total: f64 =
        (0..=cfg.k_max).map(|k| face_count_bound(n_eff, resolved.r, cfg.d, sup, &RhoVector::ones(cfg.k_max), k)).sum();
    if total > cap {
        return Err(Error::Refused(format!(
            "expected face count bound {total:.3e} exceeds the cap {cap:.3e}; lower n, r or k_max, or raise max_expected_faces"
        )));
    }
    Ok(total)
}

fn sample_cloud(cfg: &ExperimentConfig, density: &Density, seed: u64) -> Result<PointCloud> {
    match cfg.process {
        ProcessKind::Binomial => sample_binomial(cfg.n as u64, density, seed),
        ProcessKind::Poisson => sample_poisson(cfg.n, density, seed),
    }
}

/// Sample, build, thin and count for replication `rep`.
pub fn run_replication(cfg: &ExperimentConfig, resolved: &Resolved, rep: usize) -> Result<ReplicationResult> {
    let start = Instant::now();
    let seed = derive_seed(cfg.master_seed, rep as u64);
    let cloud = Arc::new(sample_cloud(cfg, &resolved.density, derive_seed(seed, 0))?);
    let n_points = cloud.len();
    let graph = build_graph(cloud, resolved.r, None, 0)?;
    let hard = match cfg.flavor() {
        Flavor::Rips => build_rips(&graph, cfg.k_max),
        Flavor::Cech => build_cech_from_graph(&graph, cfg.k_max),
    };
    let complex = if resolved.rho.is_all_ones() { hard } else { soft_thin(&hard, &resolved.rho, derive_seed(seed, 1))? };
    let counts = face_counts(&complex, &cfg.region)?;
    let chi = euler_characteristic(&counts);
    Ok(ReplicationResult { rep, f: counts.f, chi, n_points, seconds: Some(start.elapsed().as_secs_f64()) })
}

/// All replications, in index order; runs on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReplicationResult>> {
    let resolved = cfg.resolve()?;
    memory_guard(cfg, &resolved)?;
    (0..cfg.replications).into_par_iter().map(|rep| run_replication(cfg, &resolved, rep)).collect()
}

/// Writes `rep,f0..fK,chi,n_points,seconds`. `seconds` is left empty unless `with_timing`.
pub fn write_results_csv<W: Write>(results: &[ReplicationResult], k_max: usize, with_timing: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rep".to_string()];
    header.extend((0..=k_max).map(|k| format!("f{k}")));
    header.extend(["chi", "n_points", "seconds"].map(String::from));
    w.write_record(&header)?;
    for res in results {
        let mut row = vec![res.rep.to_string()];
        row.extend(res.f.iter().map(u64::to_string));
        row.push(res.chi.to_string());
        row.push(res.n_points.to_string());
        row.push(match (with_timing, res.seconds) {
            (true, Some(s)) => format!("{s:.6}"),
            _ => String::new(),
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ReplicationResult>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(rep_c), Some(chi_c), Some(np_c)) = (col("rep"), col("chi"), col("n_points")) else {
        return config("results CSV needs rep, chi and n_points columns");
    };
    let f_cols: Vec<usize> = (0..).map_while(|k| col(&format!("f{k}"))).collect();
    if f_cols.is_empty() {
        return config("results CSV has no f0 column");
    }
    let sec_c = col("seconds");
    let parse_err = |what: &str, row: usize| Error::Config(format!("bad {what} in results row {row}"));
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let f = f_cols
            .iter()
            .map(|&c| get(c).parse::<u64>().map_err(|_| parse_err("face count", row)))
            .collect::<Result<Vec<_>>>()?;
        let seconds = match sec_c.map(get) {
            Some(s) if !s.is_empty() => Some(s.parse::<f64>().map_err(|_| parse_err("seconds", row))?),
            _ => None,
        };
        out.push(ReplicationResult {
            rep: get(rep_c).parse().map_err(|_| parse_err("rep", row))?,
            f,
            chi: get(chi_c).parse().map_err(|_| parse_err("chi", row))?,
            n_points: get(np_c).parse().map_err(|_| parse_err("n_points", row))?,
            seconds,
        });
    }
    Ok(out)
}

/// The statistic's samples across replications.
pub fn statistic_samples(results: &[ReplicationResult], statistic: Statistic) -> Result<Vec<f64>> {
    results
        .iter()
        .map(|r| match statistic {
            Statistic::Chi => Ok(r.chi as f64),
            Statistic::Fk(k) => r
                .f
                .get(k)
                .map(|&v| v as f64)
                .ok_or_else(|| Error::Config(format!("results have no f{k} column"))),
        })
        .collect()
}

/// Empirical covariances of `(f_0, …, f_K, χ)` and their ratios to `var(f_0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatios {
    pub labels: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
    /// `var(f_k)/var(f_0)` for `k = 1..=K`; `None` when `var(f_0) = 0`.
    pub var_fk_over_var_f0: Vec<Option<f64>>,
    /// `cov(f_k, f_l)/var(f_0)` for `0 ≤ k, l ≤ K`.
    pub cov_over_var_f0: Vec<Vec<Option<f64>>>,
    pub var_chi_over_var_f0: Option<f64>,
}

pub fn variance_ratio_report(results: &[ReplicationResult]) -> Result<VarianceRatios> {
    let Some(first) = results.first() else {
        return Err(Error::Input("no replications".into()));
    };
    let dims = first.f.len();
    let mut columns: Vec<Vec<f64>> = (0..dims).map(|k| results.iter().map(|r| r.f[k] as f64).collect()).collect();
    columns.push(results.iter().map(|r| r.chi as f64).collect());
    let covariance: Vec<Vec<f64>> =
        columns.iter().map(|a| columns.iter().map(|b| stats::covariance(a, b)).collect()).collect();
    let v0 = covariance[0][0];
    let ratio = |x: f64| if v0 > 0.0 { Some(x / v0) } else { None };
    let mut labels: Vec<String> = (0..dims).map(|k| format!("f{k}")).collect();
    labels.push("chi".into());
    Ok(VarianceRatios {
        var_fk_over_var_f0: (1..dims).map(|k| ratio(covariance[k][k])).collect(),
        cov_over_var_f0: (0..dims).map(|k| (0..dims).map(|l| ratio(covariance[k][l])).collect()).collect(),
        var_chi_over_var_f0: ratio(covariance[dims][dims]),
        labels,
        covariance,
    })
}

/// Constants needed to predict the configured statistic: `μ`/`ν` for `k = 0..=K`.
pub fn estimate_constants_for(cfg: &ExperimentConfig, samples: u64, seed: u64) -> Result<ConstantSet> {
    let resolved = cfg.resolve()?;
    let top = match cfg.statistic {
        Statistic::Fk(k) => k,
        Statistic::Chi => cfg.k_max,
    };
    let mut estimates = Vec::new();
    for k in 0..=top {
        let e = match cfg.model {
            Flavor::Rips => estimate_mu(k, cfg.d, &resolved.density, &cfg.region, samples, derive_seed(seed, k as u64))?,
            Flavor::Cech => estimate_nu(k, cfg.d, &resolved.density, &cfg.region, samples, derive_seed(seed, k as u64))?,
        };
        estimates.push(e);
    }
    Ok(ConstantSet::new(estimates))
}

/// Everything the CLT check needs for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub config: ExperimentConfig,
    pub resolved: Resolved,
    pub statistic: Statistic,
    pub replications: usize,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub mean_stderr: f64,
    pub predicted_mean: Option<f64>,
    pub predicted_variance: Option<f64>,
    /// Empty when every replication gave the same value.
    pub z_empirical: Vec<f64>,
    pub z_predicted: Option<Vec<f64>>,
    /// `None` when the empirical variance is zero.
    pub ks_statistic: Option<f64>,
    pub ks_statistic_predicted: Option<f64>,
    /// `1.63/√R`.
    pub ks_critical_1pct: f64,
    pub moments: Option<MomentDiagnostics>,
    pub variance_ratios: VarianceRatios,
    pub regime: Option<RegimeReport>,
    pub constants: Option<ConstantSet>,
}

impl CltReport {
    pub fn ks_pass(&self, slack: f64) -> bool {
        self.ks_statistic.is_some_and(|d| d < self.ks_critical_1pct * slack)
    }
}

/// Builds the report; predictions are included when `constants` is given.
pub fn clt_report(cfg: &ExperimentConfig, results: &[ReplicationResult], constants: Option<ConstantSet>) -> Result<CltReport> {
    let resolved = cfg.resolve()?;
    let samples = statistic_samples(results, cfg.statistic)?;
    let r_count = samples.len();
    let summary: stats::RunningStats = samples.iter().copied().collect();
    let z_empirical = match normalize(&samples, Normalization::Empirical) {
        Err(Error::Degenerate(_)) => Vec::new(),
        other => other?,
    };
    let moments = if z_empirical.is_empty() { None } else { Some(moment_diagnostics(&z_empirical)?) };

    let predicted = match &constants {
        None => None,
        Some(set) => Some(predict(cfg, &resolved, set)?),
    };
    let z_predicted = match predicted {
        Some((mean, variance)) if variance > 0.0 => Some(normalize(&samples, Normalization::Predicted { mean, variance })?),
        _ => None,
    };
    let mode = match cfg.statistic {
        Statistic::Fk(k) => RegimeMode::Fk(k),
        Statistic::Chi => RegimeMode::Chi(1),
    };
    let regime = regime_check(cfg.n, resolved.r, cfg.d, &resolved.rho, mode, RegimeThresholds::default()).ok();

    Ok(CltReport {
        config: cfg.clone(),
        statistic: cfg.statistic,
        replications: r_count,
        empirical_mean: summary.mean(),
        empirical_variance: summary.variance(),
        mean_stderr: summary.stderr(),
        predicted_mean: predicted.map(|p| p.0),
        predicted_variance: predicted.map(|p| p.1),
        ks_statistic: (!z_empirical.is_empty()).then(|| ks_statistic(&z_empirical)),
        ks_statistic_predicted: z_predicted.as_deref().map(ks_statistic),
        ks_critical_1pct: ks_critical_1pct(r_count),
        z_empirical,
        z_predicted,
        moments,
        variance_ratios: variance_ratio_report(results)?,
        regime,
        constants,
        resolved,
    })
}

/// Predicted `(mean, variance)` of the configured statistic.
fn predict(cfg: &ExperimentConfig, resolved: &Resolved, set: &ConstantSet) -> Result<(f64, f64)> {
    let at = |k| predicted_moments(cfg.n, resolved.r, cfg.d, &resolved.rho, cfg.model, k, None, set);
    match cfg.statistic {
        Statistic::Fk(k) => {
            let m = at(k)?;
            Ok((m.mean_k, m.var_k))
        }
        Statistic::Chi => {
            let mut mean = 0.0;
            for k in 0..=cfg.k_max {
                let m = at(k)?.mean_k;
                mean += if k % 2 == 0 { m } else { -m };
            }
            // var(χ) ~ var(f_0) = μ_{0,A} n
            Ok((mean, at(0)?.var_k))
        }
    }
}

/// Theoretical vs empirical quantiles of the z-scores, one row per replication.
pub fn qq_rows(z: &[f64]) -> Vec<(f64, f64)> {
    let normal = Normal::standard();
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.into_iter().enumerate().map(|(i, e)| (normal.inverse_cdf((i as f64 + 0.5) / n), e)).collect()
}

pub fn write_qq_csv<W: Write>(z: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theoretical", "empirical"])?;
    for (t, e) in qq_rows(z) {
        w.write_record([format!("{t:.9}"), format!("{e:.9}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Binomial(n) and Poisson(λ = n) runs of one configuration side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepoissonComparison {
    pub binomial: CltReport,
    pub poisson: CltReport,
    pub delta_mean: f64,
    pub joint_stderr: f64,
}

impl DepoissonComparison {
    pub fn means_agree(&self, sigmas: f64) -> bool {
        self.delta_mean.abs() < sigmas * self.joint_stderr
    }
}

pub fn depoisson_compare(cfg: &ExperimentConfig, constants: Option<ConstantSet>) -> Result<DepoissonComparison> {
    let mut bin_cfg = cfg.clone();
    bin_cfg.process = ProcessKind::Binomial;
    bin_cfg.n = cfg.n.round().max(1.0);
    let mut pois_cfg = cfg.clone();
    pois_cfg.process = ProcessKind::Poisson;
    let binomial = clt_report(&bin_cfg, &run_experiment(&bin_cfg)?, constants.clone())?;
    let poisson = clt_report(&pois_cfg, &run_experiment(&pois_cfg)?, constants)?;
    let delta_mean = binomial.empirical_mean - poisson.empirical_mean;
    let joint_stderr = binomial.mean_stderr.hypot(poisson.mean_stderr);
    Ok(DepoissonComparison { binomial, poisson, delta_mean, joint_stderr })
}

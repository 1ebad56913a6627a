//! Streaming moments, normalization and normality diagnostics.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Welford accumulator; `merge` is Chan's pairwise combination.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 with fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1) as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    covariance(xs, xs)
}

/// Centering and scaling for z-scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Normalization {
    /// Sample mean and population standard deviation (divisor `R`).
    Empirical,
    /// Externally supplied mean and variance.
    Predicted { mean: f64, variance: f64 },
}

/// `(x_i − center) / √scale`.
pub fn normalize(samples: &[f64], mode: Normalization) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::Input(format!("normalization needs at least 2 samples, got {}", samples.len())));
    }
    let (center, scale) = match mode {
        Normalization::Empirical => {
            let m = mean(samples);
            let var = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / samples.len() as f64;
            if !(var > 0.0) {
                return Err(Error::Degenerate("empirical variance is zero".into()));
            }
            (m, var)
        }
        Normalization::Predicted { mean, variance } => {
            if !(variance > 0.0 && variance.is_finite()) {
                return Err(Error::Input(format!("predicted variance must be positive, got {variance}")));
            }
            (mean, variance)
        }
    };
    let sd = scale.sqrt();
    Ok(samples.iter().map(|x| (x - center) / sd).collect())
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `z` and `N(0, 1)`.
pub fn ks_statistic(z: &[f64]) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// 1% critical value of the Kolmogorov distribution, scaled by `1/√R`.
pub fn ks_critical_1pct(r: usize) -> f64 {
    1.63 / (r as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentDiagnostics {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
}

/// Sample skewness, excess kurtosis and the Jarque-Bera statistic.
pub fn moment_diagnostics(z: &[f64]) -> Result<MomentDiagnostics> {
    if z.len() < 2 {
        return Err(Error::Input("moment diagnostics need at least 2 samples".into()));
    }
    let n = z.len() as f64;
    let m = mean(z);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in z {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("zero variance in moment diagnostics".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let jarque_bera = n / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0);
    Ok(MomentDiagnostics { skewness, excess_kurtosis, jarque_bera })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert_relative_eq!(normal_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(2.0), 0.977_249_868_051_820_8, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(-3.0), 0.001_349_898_031_630_094_6, epsilon = 1e-17);
    }

    #[test]
    fn normalize_examples() {
        assert!(matches!(normalize(&[3.0, 3.0, 3.0], Normalization::Empirical), Err(Error::Degenerate(_))));
        assert_eq!(normalize(&[0.0, 2.0], Normalization::Empirical).unwrap(), vec![-1.0, 1.0]);
        let z = normalize(&[1.0, 5.0], Normalization::Predicted { mean: 3.0, variance: 4.0 }).unwrap();
        assert_eq!(z, vec![-1.0, 1.0]);
        assert!(normalize(&[1.0, 5.0], Normalization::Predicted { mean: 3.0, variance: 0.0 }).is_err());
    }

    #[test]
    fn ks_point_mass_at_median() {
        assert_eq!(ks_statistic(&[0.0; 17]), 0.5);
    }

    #[test]
    fn moments_two_point_and_constant() {
        let m = moment_diagnostics(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!(m.skewness, 0.0);
        assert_eq!(m.excess_kurtosis, -2.0);
        assert!(moment_diagnostics(&[2.0, 2.0]).is_err());
    }

    #[test]
    fn covariance_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert_relative_eq!(covariance(&x, &y), 2.0 * variance(&x));
        assert_relative_eq!(variance(&x), 5.0 / 3.0);
    }

    proptest! {
        #[test]
        fn merge_matches_single_pass(xs in prop::collection::vec(-1e3f64..1e3, 0..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let whole: RunningStats = xs.iter().copied().collect();
            let mut left: RunningStats = xs[..cut].iter().copied().collect();
            let right: RunningStats = xs[cut..].iter().copied().collect();
            left.merge(&right);
            prop_assert_eq!(left.count(), whole.count());
            prop_assert!((left.mean() - whole.mean()).abs() <= 1e-9 * (1.0 + whole.mean().abs()));
            prop_assert!((left.variance() - whole.variance()).abs() <= 1e-7 * (1.0 + whole.variance()));
        }

        #[test]
        fn ks_in_unit_interval(z in prop::collection::vec(-10f64..10.0, 1..100)) {
            let d = ks_statistic(&z);
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn empirical_z_scores_are_standardized(xs in prop::collection::vec(-1e3f64..1e3, 2..50)) {
            prop_assume!(variance(&xs) > 1e-6);
            let z = normalize(&xs, Normalization::Empirical).unwrap();
            let m = mean(&z);
            let pop_var = z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / z.len() as f64;
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((pop_var - 1.0).abs() < 1e-9);
        }
    }
}

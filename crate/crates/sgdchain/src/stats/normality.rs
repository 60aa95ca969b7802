//! Normality diagnostics: moment statistics, the Kolmogorov-Smirnov
//! statistic against a fitted normal with Monte-Carlo critical values
//! (fitted parameters make the textbook thresholds anti-conservative),
//! and the two-sample test used to compare initializations.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::StatsError;
use crate::noise::RngStream;
use crate::scalar::Scalar;

/// Null simulations used for the Monte-Carlo critical value.
pub const DEFAULT_NULL_SIMS: usize = 2000;

/// Internal seed of the null simulation; fixed so reports are reproducible.
const NULL_SIM_SEED: u64 = 0x5347_4443_4841_494e; // "SGDCHAIN"

pub fn sample_sd(values: &[f64], mean: f64) -> f64 {
    let n = values.len();
    let ss: f64 = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (ss / (n as f64 - 1.0)).sqrt()
}

/// Sample skewness `m3 / m2^{3/2}` from central moments.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|&v| (v - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Sample excess kurtosis `m4 / m2² − 3`.
pub fn excess_kurtosis(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|&v| (v - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Mean and Monte-Carlo standard error of an ensemble.
pub fn ensemble_mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = sample_sd(values, mean) / (n as f64).sqrt();
    (mean, se)
}

/// KS statistic of `values` against `N(mean, sd)` fitted from the sample.
pub fn lilliefors_statistic(values: &[f64]) -> f64 {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = sample_sd(values, mean);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut d = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let cdf = normal.cdf((v - mean) / sd);
        let d_plus = (i + 1) as f64 / n as f64 - cdf;
        let d_minus = cdf - i as f64 / n as f64;
        d = d.max(d_plus).max(d_minus);
    }
    d
}

/// Simulated critical value of the fitted-parameter KS statistic at the
/// given level: the `level` quantile over `n_sims` standard-normal samples
/// of size `n`, each re-fitted before computing the statistic.
pub fn mc_critical_value(n: usize, n_sims: usize, level: f64, seed: u64) -> f64 {
    let mut stats: Vec<f64> = (0..n_sims as u64)
        .into_par_iter()
        .map(|sim| {
            let mut rng = RngStream::new(seed, sim).rng();
            let sample: Vec<f64> = (0..n).map(|_| f64::standard_normal(&mut rng)).collect();
            lilliefors_statistic(&sample)
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((level * n_sims as f64).ceil() as usize).clamp(1, n_sims) - 1;
    stats[idx]
}

/// Fixed-width histogram with Freedman-Diaconis bin width.
#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

pub(crate) fn freedman_diaconis_histogram(values: &[f64]) -> Histogram {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let idx = (p * (n as f64 - 1.0)).round() as usize;
        sorted[idx.min(n - 1)]
    };
    let iqr = q(0.75) - q(0.25);
    let lo = sorted[0];
    let hi = sorted[n - 1];
    let width = 2.0 * iqr / (n as f64).powf(1.0 / 3.0);
    if width <= 0.0 || hi <= lo {
        return Histogram {
            lo,
            width: (hi - lo).max(1.0),
            counts: vec![n as u64],
        };
    }
    let n_bins = (((hi - lo) / width).ceil() as usize).max(1);
    let mut counts = vec![0u64; n_bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    Histogram { lo, width, counts }
}

/// Full diagnosis of one ensemble against normality.
#[derive(Clone, Debug, Serialize)]
pub struct NormalityReport {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_stat: f64,
    pub mc_critical_value: f64,
    pub skew_tol: f64,
    pub kurt_tol: f64,
    pub pass: bool,
    pub histogram: Histogram,
}

/// Moment and KS diagnosis with the default null-simulation budget.
/// Passing requires the KS statistic below its simulated critical value
/// and both moment statistics inside their tolerances.
pub fn normality_test(
    values: &[f64],
    skew_tol: f64,
    kurt_tol: f64,
) -> Result<NormalityReport, StatsError> {
    normality_test_seeded(values, skew_tol, kurt_tol, DEFAULT_NULL_SIMS, NULL_SIM_SEED)
}

pub fn normality_test_seeded(
    values: &[f64],
    skew_tol: f64,
    kurt_tol: f64,
    null_sims: usize,
    null_seed: u64,
) -> Result<NormalityReport, StatsError> {
    let n = values.len();
    if n < 100 {
        return Err(StatsError::TooFewObservations { needed: 100, got: n });
    }
    let (mean, _) = ensemble_mean_se(values);
    let sd = sample_sd(values, mean);
    if sd <= 0.0 || !sd.is_finite() {
        return Err(StatsError::DegenerateEnsemble);
    }
    let skew = skewness(values);
    let kurt = excess_kurtosis(values);
    let ks = lilliefors_statistic(values);
    let crit = mc_critical_value(n, null_sims, 0.95, null_seed);
    let pass = ks < crit && skew.abs() < skew_tol && kurt.abs() < kurt_tol;
    Ok(NormalityReport {
        n,
        mean,
        sd,
        skewness: skew,
        excess_kurtosis: kurt,
        ks_stat: ks,
        mc_critical_value: crit,
        skew_tol,
        kurt_tol,
        pass,
        histogram: freedman_diaconis_histogram(values),
    })
}

/// Two-sample KS comparison with the asymptotic 5% critical value.
#[derive(Clone, Debug, Serialize)]
pub struct TwoSampleKs {
    pub stat: f64,
    pub critical_005: f64,
    pub pass: bool,
}

pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<TwoSampleKs, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewObservations {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (sa.len(), sb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(gap);
    }
    // c(0.05) sqrt((n+m)/(nm)) with c(0.05) = 1.3581
    let critical = 1.3581 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    Ok(TwoSampleKs {
        stat: d,
        critical_005: critical,
        pass: d < critical,
    })
}

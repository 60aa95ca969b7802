//! Long-run variance estimation: nonoverlapping batch means on a single
//! trajectory, and the parallel-replication estimator.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::SgdConfig;
use crate::error::StatsError;
use crate::noise::NoiseModel;
use crate::objective::{Objective, TestFunction};
use crate::scalar::Scalar;
use crate::sgd::run_trajectory;
use crate::trajectory::{RecordOptions, Trajectory};

/// Nonoverlapping batch-means estimator of the long-run variance:
/// `batch_len * sample variance of the batch averages`, over
/// `floor(n / batch_len)` whole batches. Needs at least 10 batches.
pub fn batch_means_variance<T: Scalar>(
    series: &[T],
    batch_len: usize,
) -> Result<T, StatsError> {
    assert!(batch_len >= 1);
    let n_batches = series.len() / batch_len;
    if n_batches < 10 {
        return Err(StatsError::TooFewBatches {
            needed: 10,
            got: n_batches,
        });
    }
    let bl = T::from_usize(batch_len).unwrap();
    let means: Vec<T> = (0..n_batches)
        .map(|b| {
            let chunk = &series[b * batch_len..(b + 1) * batch_len];
            chunk.iter().copied().sum::<T>() / bl
        })
        .collect();
    let nb = T::from_usize(n_batches).unwrap();
    let grand = means.iter().copied().sum::<T>() / nb;
    let ss: T = means.iter().map(|&m| (m - grand) * (m - grand)).sum();
    Ok(bl * ss / (nb - T::one()))
}

/// Batch-means variance of test function `fn_idx` along a trajectory run
/// with per-function series storage.
pub fn asymp_var_batch_means<T: Scalar>(
    trajectory: &Trajectory<T>,
    fn_idx: usize,
    batch_len: usize,
) -> Result<T, StatsError> {
    let series = trajectory
        .phi_series
        .as_ref()
        .ok_or(StatsError::MissingPhiSeries)?;
    if trajectory.n_recorded < 10 * batch_len as u64 {
        return Err(StatsError::TooFewBatches {
            needed: 10,
            got: (trajectory.n_recorded / batch_len as u64) as usize,
        });
    }
    batch_means_variance(&series[fn_idx], batch_len)
}

/// Replication estimator: the sample variance of `N` centered scaled
/// partial sums (each already `n^{-1/2}`-scaled). Needs `N >= 30`.
pub fn asymp_var_replication<T: Scalar>(centered_scaled: &[T]) -> Result<T, StatsError> {
    let n = centered_scaled.len();
    if n < 30 {
        return Err(StatsError::TooFewObservations { needed: 30, got: n });
    }
    let nf = T::from_usize(n).unwrap();
    let mean = centered_scaled.iter().copied().sum::<T>() / nf;
    let ss: T = centered_scaled.iter().map(|&v| (v - mean) * (v - mean)).sum();
    Ok(ss / (nf - T::one()))
}

/// Normal confidence interval `mean ± z_{(1+level)/2} sqrt(var / n)`.
pub fn confidence_interval<T: Scalar>(
    mean: T,
    var: T,
    n: u64,
    level: T,
) -> Result<(T, T), StatsError> {
    let level_f = level.as_f64();
    if !(0.0 < level_f && level_f < 1.0) {
        return Err(StatsError::BadLevel(level_f));
    }
    if var < T::zero() {
        return Err(StatsError::DegenerateEnsemble);
    }
    let z = Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf((1.0 + level_f) / 2.0);
    let half = T::of_f64(z) * (var / T::from_u64(n).unwrap()).sqrt();
    Ok((mean - half, mean + half))
}

/// Default batch length: `sqrt(n)` rounded to the nearest power of two.
pub fn default_batch_len(n: usize) -> usize {
    let sqrt = (n as f64).sqrt();
    let exp = sqrt.log2().round() as u32;
    (1usize << exp).max(1)
}

/// Long-run average of `φ` over one trajectory, with a batch-means standard
/// error. Needs at least 1000 recorded iterates.
pub fn estimate_mean<T: Scalar>(
    objective: &dyn Objective<T>,
    noise: &NoiseModel<T>,
    config: &SgdConfig<T>,
    phi: &TestFunction<T>,
    stream_id: u64,
) -> Result<(T, T), StatsError> {
    if config.n_recorded() < 1000 {
        return Err(StatsError::TooFewObservations {
            needed: 1000,
            got: config.n_recorded() as usize,
        });
    }
    let traj = run_trajectory(
        objective,
        noise,
        config,
        std::slice::from_ref(phi),
        stream_id,
        RecordOptions {
            store_iterates: false,
            store_phi_series: true,
        },
    )?;
    let mean = traj.mean_phi(0);
    let batch_len = default_batch_len(traj.n_recorded as usize);
    let var = asymp_var_batch_means(&traj, 0, batch_len)?;
    let se = (var / T::from_u64(traj.n_recorded).unwrap()).sqrt();
    Ok((mean, se))
}

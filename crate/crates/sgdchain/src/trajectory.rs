//! Trajectory summaries. The CLT and bias experiments only need running
//! sums, so those are accumulated by default; full iterate history and
//! per-function value series are opt-in.

use crate::error::CoreError;
use crate::point::Point;
use crate::scalar::Scalar;

/// Per-test-function accumulators over the recording window.
#[derive(Clone, Debug, Default)]
pub struct FnAccumulator<T> {
    /// `Σ φ(θ_k)`
    pub sum: T,
    /// `Σ φ(θ_k)²`
    pub sum_sq: T,
}

/// What to retain beyond the default accumulators.
#[derive(Clone, Copy, Debug, Default)]
pub struct RecordOptions {
    /// Keep every post-burn-in iterate (needed for iterate dumps).
    pub store_iterates: bool,
    /// Keep the per-iterate `φ(θ_k)` series for each test function
    /// (needed for batch-means variance estimation).
    pub store_phi_series: bool,
}

/// Summary of one SGD run over its recording window.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub n_recorded: u64,
    pub seed: u64,
    pub stream_id: u64,
    /// `Σ θ_k`, always kept so Polyak-Ruppert averages are available.
    pub sum_theta: Vec<T>,
    /// `Σ |θ_k|²`
    pub sum_norm_sq: T,
    /// `Σ |θ_k|⁴`
    pub sum_norm_4: T,
    pub fn_sums: Vec<FnAccumulator<T>>,
    /// Post-burn-in iterates, only if requested.
    pub iterates: Option<Vec<Vec<T>>>,
    /// Post-burn-in `φ(θ_k)` series per test function, only if requested.
    pub phi_series: Option<Vec<Vec<T>>>,
    pub final_theta: Point<T>,
}

impl<T: Scalar> Trajectory<T> {
    /// Mean of `φ` over the recording window for test function `idx`.
    pub fn mean_phi(&self, idx: usize) -> T {
        self.fn_sums[idx].sum / T::from_u64(self.n_recorded).unwrap()
    }

    /// Mean of `|θ|²` over the recording window.
    pub fn mean_norm_sq(&self) -> T {
        self.sum_norm_sq / T::from_u64(self.n_recorded).unwrap()
    }

    /// Mean of `|θ|⁴` over the recording window.
    pub fn mean_norm_4(&self) -> T {
        self.sum_norm_4 / T::from_u64(self.n_recorded).unwrap()
    }

    pub fn check_finite(&self) -> Result<(), CoreError> {
        let all_finite = self.sum_norm_sq.is_finite()
            && self.sum_norm_4.is_finite()
            && self.sum_theta.iter().all(|c| c.is_finite())
            && self
                .fn_sums
                .iter()
                .all(|a| a.sum.is_finite() && a.sum_sq.is_finite());
        if all_finite {
            Ok(())
        } else {
            Err(CoreError::EvalFailure)
        }
    }
}

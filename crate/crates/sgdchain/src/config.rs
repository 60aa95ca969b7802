//! SGD run configuration.

use crate::error::CoreError;
use crate::point::Point;
use crate::scalar::Scalar;

/// Everything one SGD run needs: the constant step size, iteration budget,
/// discarded burn-in prefix, start point, base seed, and (for mini-batch
/// noise) the batch size.
#[derive(Clone, Debug)]
pub struct SgdConfig<T> {
    pub eta: T,
    pub n_iters: u64,
    pub burn_in: u64,
    pub theta0: Point<T>,
    pub seed: u64,
    pub batch_size: usize,
}

impl<T: Scalar> SgdConfig<T> {
    pub fn new(eta: T, n_iters: u64, burn_in: u64, theta0: Point<T>, seed: u64) -> Self {
        Self {
            eta,
            n_iters,
            burn_in,
            theta0,
            seed,
            batch_size: 1,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_eta(mut self, eta: T) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.eta > T::zero() && self.eta.is_finite()) {
            return Err(CoreError::InvalidConfig(format!(
                "step size must be positive and finite, got {}",
                self.eta
            )));
        }
        if self.burn_in >= self.n_iters {
            return Err(CoreError::InvalidConfig(format!(
                "empty recording window: burn_in {} must be < n_iters {}",
                self.burn_in, self.n_iters
            )));
        }
        if self.batch_size == 0 {
            return Err(CoreError::InvalidConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Recorded iterates after burn-in.
    pub fn n_recorded(&self) -> u64 {
        self.n_iters - self.burn_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_window_rejected() {
        let cfg = SgdConfig::new(0.1, 100, 100, Point::zeros(1), 1);
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("empty recording window"));
    }

    #[test]
    fn valid_config_passes() {
        let cfg = SgdConfig::new(0.1f64, 100, 10, Point::zeros(2), 1);
        cfg.validate().unwrap();
        assert_eq!(cfg.n_recorded(), 90);
    }
}

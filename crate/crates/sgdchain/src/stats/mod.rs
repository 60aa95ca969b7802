//! Monte Carlo aggregation, normality diagnostics, asymptotic-variance
//! estimation, confidence intervals, and bias-scaling experiments.

mod experiments;
mod normality;
mod variance;

pub use experiments::{
    bias_sweep, bias_trace, clt_experiment, forgetting_curve, write_ensemble_csv,
    BiasCurve, BiasTrace, EnsembleSnapshot, ForgettingCurve, McEnsemble,
};
pub use normality::{
    ensemble_mean_se, excess_kurtosis, lilliefors_statistic, mc_critical_value,
    normality_test, normality_test_seeded, sample_sd, skewness, two_sample_ks,
    Histogram, NormalityReport, TwoSampleKs, DEFAULT_NULL_SIMS,
};
pub use variance::{
    asymp_var_batch_means, asymp_var_replication, batch_means_variance,
    confidence_interval, default_batch_len, estimate_mean,
};

//! Replicated experiments: ensembles of scaled partial sums for the
//! distributional experiments, bias sweeps across step sizes, per-iteration
//! bias traces, and matched-noise forgetting curves.
//!
//! Replications run concurrently on disjoint `(seed, stream_id)` streams and
//! are always reduced in ascending `stream_id` order, so results do not
//! depend on the worker count.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SgdConfig;
use crate::error::{SgdError, StatsError};
use crate::noise::NoiseModel;
use crate::objective::{Objective, TestFunction};
use crate::point::Point;
use crate::scalar::Scalar;
use crate::sgd::{run_trajectory, scaled_partial_sum};
use crate::stats::normality::sample_sd;
use crate::trajectory::RecordOptions;

/// Snapshot of the configuration an ensemble was generated under.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSnapshot {
    pub objective: String,
    pub noise: String,
    pub phi: String,
    pub eta: f64,
    pub n_iters: u64,
    pub burn_in: u64,
    pub theta0: Vec<f64>,
}

/// `N` replicated scaled partial sums `n^{-1/2} Σ φ(θ_k)`, one per stream.
/// Replication `r` used stream `(base_seed, r)`; values are stored in
/// stream order.
#[derive(Clone, Debug, Serialize)]
pub struct McEnsemble {
    pub values: Vec<f64>,
    pub base_seed: u64,
    pub n_reps: usize,
    pub snapshot: EnsembleSnapshot,
}

fn split_errors<V>(results: Vec<(u64, Result<V, SgdError>)>) -> Result<Vec<V>, StatsError> {
    let mut failures = Vec::new();
    let mut values = Vec::with_capacity(results.len());
    for (stream_id, r) in results {
        match r {
            Ok(v) => values.push(v),
            Err(_) => failures.push(stream_id),
        }
    }
    if failures.is_empty() {
        Ok(values)
    } else {
        Err(StatsError::Divergent {
            stream_ids: failures,
        })
    }
}

/// Run `n_reps` independent trajectories on streams `0..n_reps` and collect
/// each one's uncentered scaled partial sum of `φ`.
pub fn clt_experiment<T: Scalar>(
    objective: &dyn Objective<T>,
    noise: &NoiseModel<T>,
    config: &SgdConfig<T>,
    phi: &TestFunction<T>,
    n_reps: usize,
    base_seed: u64,
) -> Result<McEnsemble, StatsError> {
    if n_reps < 2 {
        return Err(StatsError::TooFewObservations {
            needed: 2,
            got: n_reps,
        });
    }
    config.validate()?;
    let mut cfg = config.clone();
    cfg.seed = base_seed;
    let results: Vec<(u64, Result<f64, SgdError>)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|stream_id| {
            let r = run_trajectory(
                objective,
                noise,
                &cfg,
                std::slice::from_ref(phi),
                stream_id,
                RecordOptions::default(),
            )
            .and_then(|traj| scaled_partial_sum(&traj, 0))
            .map(Scalar::as_f64);
            (stream_id, r)
        })
        .collect();
    let values = split_errors(results)?;
    Ok(McEnsemble {
        values,
        base_seed,
        n_reps,
        snapshot: EnsembleSnapshot {
            objective: objective.name().to_string(),
            noise: noise.describe(),
            phi: phi.name(),
            eta: cfg.eta.as_f64(),
            n_iters: cfg.n_iters,
            burn_in: cfg.burn_in,
            theta0: cfg.theta0.to_f64_vec(),
        },
    })
}

/// Dump an ensemble as `stream_id,value` CSV.
pub fn write_ensemble_csv(ensemble: &McEnsemble, path: &Path) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "stream_id,value")?;
    for (i, v) in ensemble.values.iter().enumerate() {
        writeln!(file, "{i},{v}")?;
    }
    file.flush()
}

/// Estimated asymptotic bias per step size, with the fitted log-log scaling
/// exponent.
#[derive(Clone, Debug, Serialize)]
pub struct BiasCurve {
    pub etas: Vec<f64>,
    /// `π̂_η(φ) − φ(θ*)` per step size
    pub bias: Vec<f64>,
    /// Monte-Carlo standard error of each bias estimate
    pub se: Vec<f64>,
    pub fitted_exponent: f64,
    pub fitted_intercept: f64,
    /// how many of the smallest step sizes entered the fit
    pub fit_points: usize,
}

/// Estimate `π̂_η(φ)` over an `η` grid by ensemble-averaged trajectory means
/// (`n_reps` replications per cell) and fit the scaling exponent of
/// `|bias|` against `η` in log-log coordinates.
///
/// `cap`, when given, rejects any step size above it; the caller decides
/// whether the theoretical cap is enforced or overridden.
#[allow(clippy::too_many_arguments)]
pub fn bias_sweep<T: Scalar>(
    objective: &dyn Objective<T>,
    noise: &NoiseModel<T>,
    phi: &TestFunction<T>,
    etas: &[T],
    config: &SgdConfig<T>,
    n_reps: usize,
    base_seed: u64,
    cap: Option<T>,
) -> Result<BiasCurve, StatsError> {
    let theta_star = objective.known_min().ok_or(StatsError::MissingKnownMin)?;
    if n_reps < 2 {
        return Err(StatsError::TooFewObservations {
            needed: 2,
            got: n_reps,
        });
    }
    for w in etas.windows(2) {
        if w[1] <= w[0] {
            return Err(StatsError::Core(crate::error::CoreError::InvalidConfig(
                "etas must be strictly increasing".into(),
            )));
        }
    }
    if let Some(cap) = cap {
        for &eta in etas {
            if eta > cap {
                return Err(StatsError::EtaAboveCap {
                    eta: eta.as_f64(),
                    cap: cap.as_f64(),
                });
            }
        }
    }
    let phi_star = phi.eval(&theta_star, objective).as_f64();

    let mut bias = Vec::with_capacity(etas.len());
    let mut se = Vec::with_capacity(etas.len());
    for (ei, &eta) in etas.iter().enumerate() {
        let mut cfg = config.clone().with_eta(eta);
        cfg.seed = base_seed;
        cfg.validate()?;
        // disjoint stream block per step size
        let offset = (ei * n_reps) as u64;
        let results: Vec<(u64, Result<f64, SgdError>)> = (0..n_reps as u64)
            .into_par_iter()
            .map(|r| {
                let stream_id = offset + r;
                let out = run_trajectory(
                    objective,
                    noise,
                    &cfg,
                    std::slice::from_ref(phi),
                    stream_id,
                    RecordOptions::default(),
                )
                .map(|traj| traj.mean_phi(0).as_f64());
                (stream_id, out)
            })
            .collect();
        let means = split_errors(results)?;
        let n = means.len() as f64;
        let pi_hat = means.iter().sum::<f64>() / n;
        let sd = sample_sd(&means, pi_hat);
        bias.push(pi_hat - phi_star);
        se.push(sd / n.sqrt());
    }

    let etas_f: Vec<f64> = etas.iter().map(|e| e.as_f64()).collect();
    let (slope, intercept, fit_points) = fit_loglog_exponent(&etas_f, &bias);
    Ok(BiasCurve {
        etas: etas_f,
        bias,
        se,
        fitted_exponent: slope,
        fitted_intercept: intercept,
        fit_points,
    })
}

/// Least-squares slope of `log |bias|` against `log η`. When the curve is
/// convex in log-log (the bound mixes two regimes), only the three smallest
/// step sizes enter the fit.
fn fit_loglog_exponent(etas: &[f64], bias: &[f64]) -> (f64, f64, usize) {
    let pts: Vec<(f64, f64)> = etas
        .iter()
        .zip(bias)
        .filter(|(_, &b)| b.abs() > 0.0)
        .map(|(&e, &b)| (e.ln(), b.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN, pts.len());
    }
    let convex = pts.len() >= 4 && {
        let second_diffs_ok = pts.windows(3).all(|w| {
            let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            s2 >= s1 - 1e-9
        });
        second_diffs_ok
    };
    let used: &[(f64, f64)] = if convex { &pts[..3] } else { &pts };
    let n = used.len() as f64;
    let sx: f64 = used.iter().map(|p| p.0).sum();
    let sy: f64 = used.iter().map(|p| p.1).sum();
    let sxx: f64 = used.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = used.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept, used.len())
}

/// Ensemble-averaged evolution of the bias along the run:
/// `|mean over reps of (running mean of φ up to k) − φ(θ*)|` at checkpoints.
#[derive(Clone, Debug, Serialize)]
pub struct BiasTrace {
    pub eta: f64,
    pub ks: Vec<u64>,
    pub gap: Vec<f64>,
}

/// Per-iteration bias trace at `η = config.eta`, averaged over `n_reps`
/// replications. Checkpoints are every `stride` recorded iterates.
pub fn bias_trace<T: Scalar>(
    objective: &dyn Objective<T>,
    noise: &NoiseModel<T>,
    config: &SgdConfig<T>,
    phi: &TestFunction<T>,
    n_reps: usize,
    base_seed: u64,
    stride: u64,
) -> Result<BiasTrace, StatsError> {
    let theta_star = objective.known_min().ok_or(StatsError::MissingKnownMin)?;
    config.validate()?;
    assert!(stride >= 1);
    let phi_star = phi.eval(&theta_star, objective).as_f64();
    let mut cfg = config.clone();
    cfg.seed = base_seed;
    let n_rec = cfg.n_recorded();
    let ks: Vec<u64> = (1..=n_rec).filter(|k| k % stride == 0 || *k == n_rec).collect();

    let results: Vec<(u64, Result<Vec<f64>, SgdError>)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|stream_id| {
            let out = run_trajectory(
                objective,
                noise,
                &cfg,
                std::slice::from_ref(phi),
                stream_id,
                RecordOptions {
                    store_iterates: false,
                    store_phi_series: true,
                },
            )
            .map(|traj| {
                let series = &traj.phi_series.as_ref().unwrap()[0];
                let mut acc = 0.0f64;
                let mut running = Vec::with_capacity(ks.len());
                let mut next = 0usize;
                for (i, &v) in series.iter().enumerate() {
                    acc += v.as_f64();
                    let k = (i + 1) as u64;
                    if next < ks.len() && ks[next] == k {
                        running.push(acc / k as f64);
                        next += 1;
                    }
                }
                running
            });
            (stream_id, out)
        })
        .collect();
    let all = split_errors(results)?;
    let n = all.len() as f64;
    let gap: Vec<f64> = (0..ks.len())
        .map(|j| {
            let mean: f64 = all.iter().map(|r| r[j]).sum::<f64>() / n;
            (mean - phi_star).abs()
        })
        .collect();
    Ok(BiasTrace {
        eta: cfg.eta.as_f64(),
        ks,
        gap,
    })
}

/// Matched-noise comparison of two initializations: at each checkpoint the
/// gap between the cross-replication means of `φ`, both instantaneous and
/// time-averaged over the recording window, with the Monte-Carlo standard
/// error of the corresponding estimate.
#[derive(Clone, Debug, Serialize)]
pub struct ForgettingCurve {
    /// recorded-iterate index of each checkpoint (1-based after burn-in)
    pub ks: Vec<u64>,
    /// |mean_i φ(θ_k^a) − mean_i φ(θ_k^b)|
    pub gap_instant: Vec<f64>,
    /// combined MC standard error of the instantaneous gap
    pub se_instant: Vec<f64>,
    /// gap of the running means up to k
    pub gap_running: Vec<f64>,
    /// combined MC standard error of the running-mean gap
    pub se_running: Vec<f64>,
}

/// Run `n_reps` matched pairs of trajectories (identical noise streams,
/// different starts) and track how fast the initialization is forgotten.
#[allow(clippy::too_many_arguments)]
pub fn forgetting_curve<T: Scalar>(
    objective: &dyn Objective<T>,
    noise: &NoiseModel<T>,
    config: &SgdConfig<T>,
    theta0_a: &Point<T>,
    theta0_b: &Point<T>,
    phi: &TestFunction<T>,
    n_reps: usize,
    base_seed: u64,
    stride: u64,
) -> Result<ForgettingCurve, StatsError> {
    config.validate()?;
    assert!(stride >= 1);
    let n_rec = config.n_recorded();
    let ks: Vec<u64> = (1..=n_rec).filter(|k| k % stride == 0 || *k == n_rec).collect();

    let run_one = |theta0: &Point<T>, stream_id: u64| -> Result<(Vec<f64>, Vec<f64>), SgdError> {
        let mut cfg = config.clone();
        cfg.seed = base_seed;
        cfg.theta0 = theta0.clone();
        let traj = run_trajectory(
            objective,
            noise,
            &cfg,
            std::slice::from_ref(phi),
            stream_id,
            RecordOptions {
                store_iterates: false,
                store_phi_series: true,
            },
        )?;
        let series = &traj.phi_series.as_ref().unwrap()[0];
        let mut acc = 0.0f64;
        let mut inst = Vec::with_capacity(ks.len());
        let mut running = Vec::with_capacity(ks.len());
        let mut next = 0usize;
        for (i, &v) in series.iter().enumerate() {
            let vf = v.as_f64();
            acc += vf;
            let k = (i + 1) as u64;
            if next < ks.len() && ks[next] == k {
                inst.push(vf);
                running.push(acc / k as f64);
                next += 1;
            }
        }
        Ok((inst, running))
    };

    type PairSeries = ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>));
    let results: Vec<(u64, Result<PairSeries, SgdError>)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|stream_id| {
            let out = run_one(theta0_a, stream_id)
                .and_then(|a| run_one(theta0_b, stream_id).map(|b| (a, b)));
            (stream_id, out)
        })
        .collect();
    let pairs = split_errors(results)?;
    let n = pairs.len() as f64;

    let mut gap_instant = Vec::with_capacity(ks.len());
    let mut se_instant = Vec::with_capacity(ks.len());
    let mut gap_running = Vec::with_capacity(ks.len());
    let mut se_running = Vec::with_capacity(ks.len());
    for j in 0..ks.len() {
        let col = |pick: fn(&PairSeries) -> (&Vec<f64>, &Vec<f64>)| {
            let a: Vec<f64> = pairs.iter().map(|p| pick(p).0[j]).collect();
            let b: Vec<f64> = pairs.iter().map(|p| pick(p).1[j]).collect();
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            let va = sample_sd(&a, ma).powi(2);
            let vb = sample_sd(&b, mb).powi(2);
            ((ma - mb).abs(), ((va + vb) / n).sqrt())
        };
        let (gi, si) = col(|p| (&p.0 .0, &p.1 .0));
        let (gr, sr) = col(|p| (&p.0 .1, &p.1 .1));
        gap_instant.push(gi);
        se_instant.push(si);
        gap_running.push(gr);
        se_running.push(sr);
    }
    Ok(ForgettingCurve {
        ks,
        gap_instant,
        se_instant,
        gap_running,
        se_running,
    })
}

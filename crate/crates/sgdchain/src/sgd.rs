//! The constant step size SGD chain: single steps, full runs with running
//! accumulators, scaled partial sums, and Polyak-Ruppert averaging.

use rand::Rng;

use crate::config::SgdConfig;
use crate::error::SgdError;
use crate::noise::{NoiseModel, RngStream};
use crate::objective::{Objective, TestFunction};
use crate::point::Point;
use crate::scalar::Scalar;
use crate::trajectory::{FnAccumulator, RecordOptions, Trajectory};

/// Beyond this norm the chain is treated as divergent; the step-size theory
/// guarantees stability only under the admissible caps.
const DIVERGENCE_NORM: f64 = 1e12;

/// Chain state: the current point and its iteration index.
#[derive(Clone, Debug)]
pub struct SgdState<T> {
    pub theta: Point<T>,
    pub k: u64,
}

impl<T: Scalar> SgdState<T> {
    pub fn new(theta: Point<T>) -> Self {
        Self { theta, k: 0 }
    }
}

/// One update `θ_{k+1} = θ_k − η(∇f(θ_k) + ξ_{k+1}(θ_k))`.
pub fn sgd_step<T: Scalar, R: Rng + ?Sized>(
    state: &SgdState<T>,
    objective: &dyn Objective<T>,
    noise: &NoiseModel<T>,
    eta: T,
    rng: &mut R,
) -> Result<SgdState<T>, SgdError> {
    let d = state.theta.dim();
    let mut grad = vec![T::zero(); d];
    let mut xi = vec![T::zero(); d];
    objective.grad_into(&state.theta, &mut grad);
    noise.draw_into(&state.theta, &mut xi, rng)?;
    let mut next = state.theta.as_slice().to_vec();
    for i in 0..d {
        next[i] = next[i] - eta * (grad[i] + xi[i]);
    }
    let theta = Point::new(next).map_err(|_| SgdError::Divergence {
        k: state.k + 1,
        norm: f64::INFINITY,
    })?;
    let norm = theta.norm().as_f64();
    if norm > DIVERGENCE_NORM {
        return Err(SgdError::Divergence {
            k: state.k + 1,
            norm,
        });
    }
    Ok(SgdState {
        theta,
        k: state.k + 1,
    })
}

/// Run the chain for `config.n_iters` steps from `config.theta0`, recording
/// the per-iterate sums after the burn-in prefix. The random stream is
/// `(config.seed, stream_id)`; the run is bit-reproducible given that pair.
pub fn run_trajectory<T: Scalar>(
    objective: &dyn Objective<T>,
    noise: &NoiseModel<T>,
    config: &SgdConfig<T>,
    test_fns: &[TestFunction<T>],
    stream_id: u64,
    record: RecordOptions,
) -> Result<Trajectory<T>, SgdError> {
    config.validate()?;
    let d = objective.dim();
    assert_eq!(
        config.theta0.dim(),
        d,
        "theta0 dimension must match the objective"
    );
    let mut rng = RngStream::new(config.seed, stream_id).rng();

    let mut theta: Vec<T> = config.theta0.as_slice().to_vec();
    let mut grad = vec![T::zero(); d];
    let mut xi = vec![T::zero(); d];

    let n_recorded = config.n_recorded();
    let mut sum_theta = vec![T::zero(); d];
    let mut sum_norm_sq = T::zero();
    let mut sum_norm_4 = T::zero();
    let mut fn_sums: Vec<FnAccumulator<T>> = test_fns
        .iter()
        .map(|_| FnAccumulator {
            sum: T::zero(),
            sum_sq: T::zero(),
        })
        .collect();
    let mut iterates = record
        .store_iterates
        .then(|| Vec::with_capacity(n_recorded as usize));
    let mut phi_series = record
        .store_phi_series
        .then(|| vec![Vec::with_capacity(n_recorded as usize); test_fns.len()]);

    let divergence_sq = T::of_f64(DIVERGENCE_NORM * DIVERGENCE_NORM);
    for k in 0..config.n_iters {
        objective.grad_into(&theta, &mut grad);
        noise.draw_into(&theta, &mut xi, &mut rng)?;
        let mut norm_sq = T::zero();
        for i in 0..d {
            let v = theta[i] - config.eta * (grad[i] + xi[i]);
            theta[i] = v;
            norm_sq += v * v;
        }
        if !norm_sq.is_finite() || norm_sq > divergence_sq {
            return Err(SgdError::Divergence {
                k: k + 1,
                norm: norm_sq.as_f64().sqrt(),
            });
        }
        if k >= config.burn_in {
            for (s, &v) in sum_theta.iter_mut().zip(&theta) {
                *s += v;
            }
            sum_norm_sq += norm_sq;
            sum_norm_4 += norm_sq * norm_sq;
            for (acc, phi) in fn_sums.iter_mut().zip(test_fns) {
                let v = phi.eval(&theta, objective);
                acc.sum += v;
                acc.sum_sq += v * v;
            }
            if let Some(store) = iterates.as_mut() {
                store.push(theta.clone());
            }
            if let Some(series) = phi_series.as_mut() {
                for (s, phi) in series.iter_mut().zip(test_fns) {
                    s.push(phi.eval(&theta, objective));
                }
            }
        }
    }

    let traj = Trajectory {
        n_recorded,
        seed: config.seed,
        stream_id,
        sum_theta,
        sum_norm_sq,
        sum_norm_4,
        fn_sums,
        iterates,
        phi_series,
        final_theta: Point::new(theta).map_err(|_| SgdError::Divergence {
            k: config.n_iters,
            norm: f64::INFINITY,
        })?,
    };
    traj.check_finite()?;
    Ok(traj)
}

/// The uncentered scaled partial sum `n^{-1/2} Σ_k φ(θ_k)` over the
/// recording window, as plotted in the density experiments.
pub fn scaled_partial_sum<T: Scalar>(
    trajectory: &Trajectory<T>,
    fn_idx: usize,
) -> Result<T, SgdError> {
    if trajectory.n_recorded == 0 {
        return Err(SgdError::EmptyWindow { burn_in: 0 });
    }
    let n = T::from_u64(trajectory.n_recorded).unwrap();
    Ok(trajectory.fn_sums[fn_idx].sum / n.sqrt())
}

/// The centered variant `n^{-1/2} Σ_k [φ(θ_k) − π̂]` for a caller-supplied
/// stationary-mean estimate `π̂`.
pub fn scaled_partial_sum_centered<T: Scalar>(
    trajectory: &Trajectory<T>,
    fn_idx: usize,
    pi_hat: T,
) -> Result<T, SgdError> {
    if trajectory.n_recorded == 0 {
        return Err(SgdError::EmptyWindow { burn_in: 0 });
    }
    let n = T::from_u64(trajectory.n_recorded).unwrap();
    Ok((trajectory.fn_sums[fn_idx].sum - n * pi_hat) / n.sqrt())
}

/// Polyak-Ruppert average `(1/n) Σ_k θ_k` over the recording window.
pub fn polyak_ruppert_average<T: Scalar>(
    trajectory: &Trajectory<T>,
) -> Result<Point<T>, SgdError> {
    if trajectory.n_recorded == 0 {
        return Err(SgdError::EmptyWindow { burn_in: 0 });
    }
    let n = T::from_u64(trajectory.n_recorded).unwrap();
    let coords = trajectory.sum_theta.iter().map(|&s| s / n).collect();
    Ok(Point::new(coords)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{QuadSine, Quadratic};

    fn quadratic(d: usize) -> Quadratic<f64> {
        Quadratic::centered_at_zero(d)
    }

    #[test]
    fn step_fixed_point_and_contraction() {
        let obj = quadratic(2);
        let mut rng = RngStream::new(1, 0).rng();
        // zero gradient + no noise: only k advances
        let s0 = SgdState::new(Point::zeros(2));
        let s1 = sgd_step(&s0, &obj, &NoiseModel::None, 0.1, &mut rng).unwrap();
        assert_eq!(s1.theta.as_slice(), &[0.0, 0.0]);
        assert_eq!(s1.k, 1);
        // one deterministic step from (1,0): (1-eta) theta
        let s = SgdState::new(Point::new(vec![1.0, 0.0]).unwrap());
        let s = sgd_step(&s, &obj, &NoiseModel::None, 0.1, &mut rng).unwrap();
        assert!((s.theta[0] - 0.9).abs() < 1e-15);
        assert_eq!(s.theta[1], 0.0);
    }

    #[test]
    fn fifty_steps_geometric_contraction() {
        let obj = quadratic(2);
        let mut rng = RngStream::new(1, 0).rng();
        let mut s = SgdState::new(Point::new(vec![1.0, 0.0]).unwrap());
        for _ in 0..50 {
            s = sgd_step(&s, &obj, &NoiseModel::None, 0.1, &mut rng).unwrap();
        }
        let expect = 0.9f64.powi(50);
        assert!((s.theta[0] - expect).abs() < 1e-12, "{}", s.theta[0]);
        assert!((expect - 5.15e-3).abs() < 1e-4);
    }

    #[test]
    fn zero_start_gives_zero_accumulators() {
        let obj = quadratic(3);
        let cfg = SgdConfig::new(0.1, 500, 100, Point::zeros(3), 7);
        let traj = run_trajectory(
            &obj,
            &NoiseModel::None,
            &cfg,
            &[TestFunction::norm()],
            0,
            RecordOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.n_recorded, 400);
        assert_eq!(traj.fn_sums[0].sum, 0.0);
        assert_eq!(traj.sum_norm_sq, 0.0);
    }

    #[test]
    fn empty_window_is_an_error() {
        let obj = quadratic(1);
        let cfg = SgdConfig::new(0.1, 100, 100, Point::zeros(1), 7);
        let err = run_trajectory(
            &obj,
            &NoiseModel::None,
            &cfg,
            &[],
            0,
            RecordOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("empty recording window"));
    }

    #[test]
    fn divergence_is_loud() {
        // eta = 3 on the quadratic: |theta| grows by 2x per step
        let obj = quadratic(1);
        let cfg = SgdConfig::new(3.0, 100, 0, Point::filled(1, 1.0).unwrap(), 7);
        let err = run_trajectory(
            &obj,
            &NoiseModel::None,
            &cfg,
            &[],
            0,
            RecordOptions::default(),
        )
        .unwrap_err();
        match err {
            SgdError::Divergence { k, norm } => {
                assert!(k > 0 && norm > 1e12);
            }
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn quadsine_second_moment_under_closed_form_bound() {
        // eta = 0.1, gaussian sigma = 1: mean |theta|^2 stays below
        // 3 + 2*beta/alpha = 53
        let obj = QuadSine::<f64>::new();
        let noise = NoiseModel::gaussian(1.0).unwrap();
        let cfg = SgdConfig::new(0.1, 100_000, 100, Point::zeros(1), 4);
        let traj = run_trajectory(
            &obj,
            &noise,
            &cfg,
            &[TestFunction::norm()],
            0,
            RecordOptions::default(),
        )
        .unwrap();
        assert!(traj.mean_norm_sq() <= 53.0, "{}", traj.mean_norm_sq());
    }

    #[test]
    fn determinism_bit_identical() {
        let obj = quadratic(2);
        let noise = NoiseModel::gaussian(1.0).unwrap();
        let cfg = SgdConfig::new(0.05, 2000, 100, Point::filled(2, 1.0).unwrap(), 99);
        let run = || {
            run_trajectory(
                &obj,
                &noise,
                &cfg,
                &[TestFunction::norm(), TestFunction::coordinate(1)],
                3,
                RecordOptions::default(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.fn_sums[0].sum.to_bits(), b.fn_sums[0].sum.to_bits());
        assert_eq!(a.fn_sums[1].sum_sq.to_bits(), b.fn_sums[1].sum_sq.to_bits());
        assert_eq!(a.sum_norm_4.to_bits(), b.sum_norm_4.to_bits());
        assert_eq!(
            a.final_theta.as_slice()[0].to_bits(),
            b.final_theta.as_slice()[0].to_bits()
        );
    }

    #[test]
    fn scaled_sum_of_constant_fn() {
        // phi = c  =>  scaled sum = c sqrt(n); centered at its own mean => 0
        let obj = quadratic(1);
        let cfg = SgdConfig::new(0.1, 1100, 100, Point::zeros(1), 7);
        let c = 2.5f64;
        let phi = TestFunction::custom(
            "const",
            std::sync::Arc::new(move |_: &[f64]| c),
            Some(0.0),
        );
        let traj = run_trajectory(
            &obj,
            &NoiseModel::None,
            &cfg,
            &[phi],
            0,
            RecordOptions::default(),
        )
        .unwrap();
        let s = scaled_partial_sum(&traj, 0).unwrap();
        assert!((s - c * 1000f64.sqrt()).abs() < 1e-9);
        let centered = scaled_partial_sum_centered(&traj, 0, traj.mean_phi(0)).unwrap();
        assert!(centered.abs() < 1e-9);
    }

    #[test]
    fn polyak_ruppert_limits() {
        // deterministic contraction toward the center
        let center = Point::new(vec![2.0f64, -1.0]).unwrap();
        let obj = Quadratic::new(center.clone());
        let cfg = SgdConfig::new(0.1, 5000, 1000, Point::zeros(2), 7);
        let traj = run_trajectory(
            &obj,
            &NoiseModel::None,
            &cfg,
            &[],
            0,
            RecordOptions::default(),
        )
        .unwrap();
        let avg = polyak_ruppert_average(&traj).unwrap();
        for (a, c) in avg.as_slice().iter().zip(center.as_slice()) {
            assert!((a - c).abs() < 0.1, "{a} vs {c}");
        }
        // constant trajectory: average equals the point
        let cfg2 = SgdConfig::new(0.1, 100, 10, center.clone(), 7);
        let traj2 = run_trajectory(
            &obj,
            &NoiseModel::None,
            &cfg2,
            &[],
            0,
            RecordOptions::default(),
        )
        .unwrap();
        let avg2 = polyak_ruppert_average(&traj2).unwrap();
        assert_eq!(avg2.as_slice(), center.as_slice());
    }

    #[test]
    fn alternating_synthetic_average_is_midpoint() {
        // two-point synthetic trajectory assembled by hand
        let traj = Trajectory::<f64> {
            n_recorded: 2,
            seed: 0,
            stream_id: 0,
            sum_theta: vec![1.0 + 3.0, 2.0 + 6.0],
            sum_norm_sq: 0.0,
            sum_norm_4: 0.0,
            fn_sums: vec![],
            iterates: None,
            phi_series: None,
            final_theta: Point::new(vec![3.0, 6.0]).unwrap(),
        };
        let avg = polyak_ruppert_average(&traj).unwrap();
        assert_eq!(avg.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn f32_instantiation_runs() {
        let obj = Quadratic::<f32>::centered_at_zero(2);
        let noise = NoiseModel::gaussian(1.0f32).unwrap();
        let cfg = SgdConfig::new(0.1f32, 1000, 100, Point::zeros(2), 5);
        let traj = run_trajectory(
            &obj,
            &noise,
            &cfg,
            &[TestFunction::norm()],
            0,
            RecordOptions::default(),
        )
        .unwrap();
        assert!(traj.mean_norm_sq().is_finite());
    }
}

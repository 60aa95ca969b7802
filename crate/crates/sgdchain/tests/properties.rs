//! Cross-module invariants: stationarity surrogates, Lipschitz properties,
//! admissibility of the contraction rate across the built-in objectives,
//! and end-to-end reproducibility of the online (mini-batch) path.

use std::sync::Arc;

use proptest::prelude::*;
use sgdchain::noise::gen_regression_data;
use sgdchain::objectives::{
    CauchyRegMle, Quadratic, QuadSine, SimplifiedBz, SimplifiedCauchy,
};
use sgdchain::sgd::run_trajectory;
use sgdchain::stats::{bias_sweep, estimate_mean};
use sgdchain::theory::{max_step_size, bias_decay_constants, step_size_bounds};
use sgdchain::trajectory::RecordOptions;
use sgdchain::{
    LocalGrowthFn, NoiseModel, Objective, Point, RngStream, Scalar, SgdConfig,
    TestFunction,
};

fn ball_point(rng: &mut impl rand::Rng, d: usize, radius: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| f64::standard_normal(rng)).collect();
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let u: f64 = f64::unit_uniform(rng);
    let r = radius * u.powf(1.0 / d as f64);
    for c in v.iter_mut() {
        *c *= r / n;
    }
    v
}

#[test]
fn norm_and_coordinate_test_functions_are_one_lipschitz() {
    let quad = Quadratic::<f64>::centered_at_zero(6);
    let norm = TestFunction::norm();
    let coord = TestFunction::coordinate(2);
    let mut rng = RngStream::new(90, 0).rng();
    for _ in 0..1000 {
        let a = ball_point(&mut rng, 6, 10.0);
        let b = ball_point(&mut rng, 6, 10.0);
        let dist = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        for phi in [&norm, &coord] {
            let gap = (phi.eval(&a, &quad) - phi.eval(&b, &quad)).abs();
            assert!(gap <= dist * (1.0 + 1e-12), "gap {gap} > dist {dist}");
        }
    }
}

/// Stationarity surrogate: with eta at half the ergodicity cap, the running
/// mean of |theta|^2 settles — the last-quarter mean stays within 5% of the
/// second-quarter mean.
fn assert_moment_stability(
    objective: &dyn Objective<f64>,
    noise: &NoiseModel<f64>,
    n_iters: u64,
    seed: u64,
) {
    let c = objective.constants();
    let l_xi = noise.l_xi_second(objective.dim()).unwrap_or(0.0);
    let eta = 0.5 * max_step_size(c.l, c.alpha, l_xi);
    let cfg = SgdConfig::new(eta, n_iters, 0, Point::zeros(objective.dim()), seed);
    let phi = TestFunction::custom(
        "norm_sq",
        Arc::new(|t: &[f64]| t.iter().map(|c| c * c).sum()),
        None,
    );
    let traj = run_trajectory(
        objective,
        noise,
        &cfg,
        std::slice::from_ref(&phi),
        0,
        RecordOptions {
            store_iterates: false,
            store_phi_series: true,
        },
    )
    .expect("stable run");
    let series = &traj.phi_series.as_ref().unwrap()[0];
    let q = series.len() / 4;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let q2 = mean(&series[q..2 * q]);
    let q4 = mean(&series[3 * q..]);
    assert!(
        (q4 - q2).abs() <= 0.05 * q2.abs().max(1e-12),
        "{}: quarter means {q2} vs {q4} differ by more than 5%",
        objective.name()
    );
}

#[test]
fn moment_stability_for_every_builtin() {
    let gauss = NoiseModel::gaussian(1.0).unwrap();
    assert_moment_stability(&QuadSine::<f64>::new(), &gauss, 400_000, 91);
    assert_moment_stability(&SimplifiedCauchy::new(5, 0.1).unwrap(), &gauss, 400_000, 92);
    assert_moment_stability(&SimplifiedBz::new(5, 0.1, 1.0).unwrap(), &gauss, 400_000, 93);
    assert_moment_stability(
        &Quadratic::<f64>::centered_at_zero(3),
        &gauss,
        200_000,
        94,
    );
    // the regression chain relaxes over ~1/(eta * curvature) ~ 1e3 steps at
    // half the cap, so its quarters need to be long for the 5% comparison
    let data = gen_regression_data::<f64>(200, 5, 10.0, &RngStream::new(95, 0));
    let cauchy = CauchyRegMle::new(data, 0.1).unwrap();
    let t_noise = NoiseModel::student_t(5.0, 1.0).unwrap();
    assert_moment_stability(&cauchy, &t_noise, 2_000_000, 96);
}

#[test]
fn rho_inside_unit_interval_on_eta_grid_per_objective() {
    let noise_for = |d: usize| NoiseModel::gaussian(1.0f64).unwrap().l_xi(d).unwrap();
    let cases: Vec<(String, f64, f64, f64, f64, f64)> = vec![
        {
            let o = QuadSine::<f64>::new();
            let c = o.constants();
            let ts = o.known_min().unwrap().norm();
            ("quadsine".into(), c.l, c.alpha, c.beta, noise_for(1), ts)
        },
        {
            let o = SimplifiedCauchy::new(5, 0.1).unwrap();
            let c = o.constants();
            ("simplified-cauchy".into(), c.l, c.alpha, c.beta, noise_for(5), 0.0)
        },
        {
            let o = SimplifiedBz::new(5, 0.1, 1.0).unwrap();
            let c = o.constants();
            ("simplified-bz".into(), c.l, c.alpha, c.beta, noise_for(5), 0.0)
        },
    ];
    for (name, l, alpha, beta, l_xi, ts_norm) in cases {
        let bounds = step_size_bounds(l, alpha, beta, l_xi, ts_norm);
        for i in 1..=100 {
            let eta = bounds.overall_max * i as f64 / 101.0;
            let out = bias_decay_constants(l, alpha, beta, l_xi, ts_norm, eta)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(
                out.rho > 0.0 && out.rho < 1.0,
                "{name}: rho {} at eta {eta}",
                out.rho
            );
        }
    }
}

#[test]
fn simplified_cauchy_bias_increases_with_step_size() {
    let obj = SimplifiedCauchy::new(10, 0.1).unwrap();
    let noise = NoiseModel::student_t(5.0, 1.0).unwrap();
    let cfg = SgdConfig::new(0.05, 21_000, 1000, Point::filled(10, 1.0).unwrap(), 97);
    let curve = bias_sweep(
        &obj,
        &noise,
        &TestFunction::sigmoid_of_f(),
        &[0.05, 0.1, 0.2, 0.3],
        &cfg,
        100,
        97,
        None,
    )
    .unwrap();
    for i in 0..curve.bias.len() - 1 {
        let gap = curve.bias[i + 1] - curve.bias[i];
        let se = (curve.se[i].powi(2) + curve.se[i + 1].powi(2)).sqrt();
        assert!(
            gap > 2.0 * se,
            "bias not increasing between eta {} and {}: gap {gap}, se {se}",
            curve.etas[i],
            curve.etas[i + 1]
        );
    }
}

#[test]
fn simplified_bz_stationary_sigmoid_mean_exceeds_minimum_value() {
    // f >= f(0) pointwise, so the stationary estimate must sit above phi(0)
    let obj = SimplifiedBz::new(4, 0.1, 1.0).unwrap();
    let noise = NoiseModel::gaussian(1.0).unwrap();
    let cfg = SgdConfig::new(0.05, 20_000, 1000, Point::zeros(4), 98);
    let phi = TestFunction::sigmoid_of_f();
    let (mean, _se) = estimate_mean(&obj, &noise, &cfg, &phi, 0).unwrap();
    let phi_at_min = phi.eval(obj.known_min().unwrap().as_slice(), &obj);
    assert!(mean > phi_at_min, "{mean} <= {phi_at_min}");
}

#[test]
fn student_t_df5_fourth_moment_stable_across_seeds() {
    // Assumption-4 regime: df = 5 > 4, the empirical fourth moment over
    // 1e6 draws is finite and consistent across seeds
    let m4_of = |seed: u64| {
        let mut rng = RngStream::new(seed, 0).rng();
        let n = 1_000_000usize;
        (0..n)
            .map(|_| sgdchain::noise::sample_student_t(&mut rng, 5.0f64, 1.0).powi(4))
            .sum::<f64>()
            / n as f64
    };
    let a = m4_of(1);
    let b = m4_of(2);
    // theoretical m4 = 3 df^2/((df-2)(df-4)) = 25
    for v in [a, b] {
        assert!(v.is_finite() && v > 5.0 && v < 125.0, "m4 = {v}");
    }
    assert!(
        (a - b).abs() / a.max(b) < 0.75,
        "fourth moments unstable: {a} vs {b}"
    );
}

#[test]
fn online_sgd_end_to_end_reproducible() {
    // mini-batch path (b = 2) on the regression objective: identical
    // (seed, stream) reproduces the trajectory bit-for-bit, a different
    // stream does not
    let data = gen_regression_data::<f64>(300, 5, 10.0, &RngStream::new(99, 0));
    let obj = Arc::new(CauchyRegMle::new(data, 0.1).unwrap());
    let noise = NoiseModel::minibatch(obj.clone(), 2).unwrap();
    let cfg = SgdConfig::new(0.05, 3000, 100, Point::filled(5, 1.0).unwrap(), 100)
        .with_batch_size(2);
    let run = |stream: u64| {
        run_trajectory(
            obj.as_ref(),
            &noise,
            &cfg,
            &[TestFunction::norm()],
            stream,
            RecordOptions::default(),
        )
        .unwrap()
    };
    let a = run(0);
    let b = run(0);
    let c = run(1);
    assert_eq!(a.fn_sums[0].sum.to_bits(), b.fn_sums[0].sum.to_bits());
    assert_eq!(
        a.final_theta.as_slice()[0].to_bits(),
        b.final_theta.as_slice()[0].to_bits()
    );
    assert_ne!(a.fn_sums[0].sum.to_bits(), c.fn_sums[0].sum.to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn growth_fn_inverse_round_trips(
        c in 1e-3f64..1e3,
        p in 1.0f64..4.0,
        exp in -6i32..6,
    ) {
        let g = LocalGrowthFn::power(c, p).unwrap();
        let y = 10f64.powi(exp);
        let back = g.eval(g.inverse(y));
        prop_assert!((back - y).abs() / y <= 1e-10);
        prop_assert_eq!(g.eval(0.0), 0.0);
    }

    #[test]
    fn scaled_sum_self_centering(values in proptest::collection::vec(-10.0f64..10.0, 10..200)) {
        // centering a synthetic accumulator by its own mean gives zero
        let n = values.len() as f64;
        let sum: f64 = values.iter().sum();
        let centered = (sum - n * (sum / n)) / n.sqrt();
        prop_assert!(centered.abs() < 1e-9);
    }
}

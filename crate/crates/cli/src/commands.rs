//! Implementations of the subcommands.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sgdchain::objectives::hessian_negativity_witness;
use sgdchain::stats::{
    asymp_var_batch_means, asymp_var_replication, bias_sweep, bias_trace, clt_experiment,
    confidence_interval, default_batch_len, ensemble_mean_se, normality_test,
    two_sample_ks, write_ensemble_csv, McEnsemble,
};
use sgdchain::theory::{
    check_dissipativity, check_linear_growth, check_local_growth, max_step_size,
    mu2_bound, mu4_bound, bias_decay_constants, step_size_bounds, stationary_bias_constant,
    grad_domination_bias, Certificate, GrowthCheckKind,
};
use sgdchain::trajectory::RecordOptions;
use sgdchain::{sgd, NoiseModel, Objective, Point, RngStream, StatsError, TheoryError};

use crate::spec::{build_run, BuiltRun, RunSpec};
use crate::CliError;

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

/// Drop the fully resolved configuration next to the artifacts so a run can
/// be reproduced from its output directory alone.
fn write_resolved_config(spec: &RunSpec) -> Result<(), CliError> {
    let path = spec.output_dir.join("resolved_config.cfg");
    std::fs::write(&path, spec.serialize())
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(format!("serialization: {e}")))?;
    std::fs::write(path, json + "\n")
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn stats_err(e: StatsError) -> CliError {
    match e {
        StatsError::Divergent { .. } | StatsError::Sgd(_) => CliError::Numerical(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

/// The operational step-size cap for an objective/noise pair: the
/// ergodicity bound `[α−sqrt((α²−(3L²+L_ξ))∨0)]/(3L²+L_ξ)` with the
/// second-moment noise constant (0 when the noise has no closed form).
pub fn ergodicity_cap(objective: &dyn Objective<f64>, noise: &NoiseModel<f64>) -> f64 {
    let c = objective.constants();
    let l_xi = noise.l_xi_second(objective.dim()).unwrap_or(0.0);
    max_step_size(c.l, c.alpha, l_xi)
}

/// Refuse step sizes above the theoretical cap unless `--force` is passed.
pub fn check_cap(
    objective: &dyn Objective<f64>,
    noise: &NoiseModel<f64>,
    etas: &[f64],
    force: bool,
) -> Result<(), CliError> {
    let cap = ergodicity_cap(objective, noise);
    for &eta in etas {
        if eta >= cap {
            let msg = format!(
                "step size {eta} is not below the ergodicity cap {cap:.6e} \
                 (the unique-stationary-distribution condition with L = {}, \
                 alpha = {}); pass --force to run anyway",
                objective.constants().l,
                objective.constants().alpha,
            );
            if force {
                eprintln!("warning: {msg}");
            } else {
                return Err(CliError::Usage(msg));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// generate-data
// ---------------------------------------------------------------------------

pub fn cmd_generate_data(
    m: usize,
    d: usize,
    noise_df: f64,
    seed: u64,
    out_dir: &Path,
    name: Option<String>,
) -> Result<(), CliError> {
    if m == 0 || d == 0 {
        return Err(CliError::Usage("need m >= 1 and d >= 1".into()));
    }
    if noise_df <= 0.0 {
        return Err(CliError::Usage("noise-df must be positive".into()));
    }
    ensure_dir(out_dir)?;
    let data = sgdchain::noise::gen_regression_data::<f64>(
        m,
        d,
        noise_df,
        &RngStream::new(seed, 0),
    );
    let stem = name.unwrap_or_else(|| format!("regdata_m{m}_d{d}_seed{seed}"));
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let meta_path = out_dir.join(format!("{stem}.meta.json"));
    data.write_csv(&csv_path)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    data.write_meta_json(&meta_path)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", meta_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunSummary {
    objective: String,
    noise: String,
    eta: f64,
    n_recorded: u64,
    mean_norm_sq: f64,
    fn_means: Vec<(String, f64)>,
    polyak_ruppert_average: Vec<f64>,
    final_theta: Vec<f64>,
}

pub fn cmd_run(
    spec: &RunSpec,
    dump_iterates: Option<PathBuf>,
    force: bool,
) -> Result<(), CliError> {
    let BuiltRun {
        objective,
        noise,
        config,
        test_fns,
    } = build_run(spec)?;
    check_cap(objective.as_ref(), &noise, &[config.eta], force)?;
    let record = RecordOptions {
        store_iterates: dump_iterates.is_some(),
        store_phi_series: false,
    };
    let traj = sgd::run_trajectory(objective.as_ref(), &noise, &config, &test_fns, 0, record)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let summary = RunSummary {
        objective: objective.name().to_string(),
        noise: noise.describe(),
        eta: config.eta,
        n_recorded: traj.n_recorded,
        mean_norm_sq: traj.mean_norm_sq(),
        fn_means: test_fns
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name(), traj.mean_phi(i)))
            .collect(),
        polyak_ruppert_average: sgd::polyak_ruppert_average(&traj)
            .map_err(|e| CliError::Numerical(e.to_string()))?
            .to_f64_vec(),
        final_theta: traj.final_theta.to_f64_vec(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    if let Some(path) = dump_iterates {
        let iterates = traj.iterates.as_ref().expect("requested storage");
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(&path)
                .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?,
        );
        let d = objective.dim();
        let header: Vec<String> = (1..=d).map(|j| format!("theta_{j}")).collect();
        writeln!(file, "k,{}", header.join(",")).map_err(|e| CliError::Usage(e.to_string()))?;
        for (i, row) in iterates.iter().enumerate() {
            let k = config.burn_in + 1 + i as u64;
            let cols: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(file, "{k},{}", cols.join(",")).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// clt
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MeanShift {
    eta_a: f64,
    eta_b: f64,
    mean_a: f64,
    mean_b: f64,
    se_a: f64,
    se_b: f64,
    shift: f64,
    combined_se: f64,
    significant_at_2se: bool,
}

fn eta_tag(eta: f64) -> String {
    format!("{eta}").replace('.', "p")
}

pub fn cmd_clt(spec: &RunSpec, force: bool) -> Result<(), CliError> {
    let BuiltRun {
        objective,
        noise,
        config,
        test_fns,
    } = build_run(spec)?;
    if spec.experiment.n_reps < 2 {
        return Err(CliError::Usage("need n_reps >= 2".into()));
    }
    let etas: Vec<f64> = if spec.experiment.etas.is_empty() {
        vec![config.eta]
    } else {
        spec.experiment.etas.clone()
    };
    check_cap(objective.as_ref(), &noise, &etas, force)?;
    ensure_dir(&spec.output_dir)?;
    write_resolved_config(spec)?;

    let dim = objective.dim();
    let mut inits: Vec<(String, Point<f64>)> =
        vec![("init0".to_string(), config.theta0.clone())];
    if let Some(alt) = &spec.experiment.theta0_alt {
        inits.push(("init1".to_string(), alt.to_point(dim)?));
    }
    let phi = &test_fns[0];

    let mut per_eta_values: Vec<Vec<Vec<f64>>> = Vec::new();
    for (ei, &eta) in etas.iter().enumerate() {
        let mut cell_values = Vec::new();
        for (ii, (tag, theta0)) in inits.iter().enumerate() {
            let mut cfg = config.clone().with_eta(eta);
            cfg.theta0 = theta0.clone();
            // disjoint seed per cell keeps the ensembles independent
            let cell_seed = spec
                .sgd
                .seed
                .wrapping_add((ei * inits.len() + ii) as u64);
            let ensemble: McEnsemble = clt_experiment(
                objective.as_ref(),
                &noise,
                &cfg,
                phi,
                spec.experiment.n_reps,
                cell_seed,
            )
            .map_err(stats_err)?;
            let csv = spec
                .output_dir
                .join(format!("clt_eta{}_{}.csv", eta_tag(eta), tag));
            write_ensemble_csv(&ensemble, &csv)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            println!("wrote {}", csv.display());
            let report = normality_test(
                &ensemble.values,
                spec.experiment.skew_tol,
                spec.experiment.kurt_tol,
            )
            .map_err(stats_err)?;
            write_json(
                &spec
                    .output_dir
                    .join(format!("normality_eta{}_{}.json", eta_tag(eta), tag)),
                &report,
            )?;
            println!(
                "eta={eta} {tag}: normality {} (ks {:.4} < crit {:.4}: {}, skew {:+.3}, \
                 ex.kurt {:+.3})",
                if report.pass { "PASS" } else { "FAIL" },
                report.ks_stat,
                report.mc_critical_value,
                report.ks_stat < report.mc_critical_value,
                report.skewness,
                report.excess_kurtosis,
            );
            cell_values.push(ensemble.values);
        }
        if cell_values.len() == 2 {
            let ks = two_sample_ks(&cell_values[0], &cell_values[1]).map_err(stats_err)?;
            write_json(
                &spec
                    .output_dir
                    .join(format!("ks_inits_eta{}.json", eta_tag(eta))),
                &ks,
            )?;
            println!(
                "eta={eta} cross-initialization KS {} (stat {:.4}, crit {:.4})",
                if ks.pass { "PASS" } else { "FAIL" },
                ks.stat,
                ks.critical_005
            );
        }
        per_eta_values.push(cell_values);
    }

    if etas.len() >= 2 {
        let mut shifts = Vec::new();
        for w in 0..etas.len() - 1 {
            let (ma, sa) = ensemble_mean_se(&per_eta_values[w][0]);
            let (mb, sb) = ensemble_mean_se(&per_eta_values[w + 1][0]);
            let shift = (ma - mb).abs();
            let combined = (sa * sa + sb * sb).sqrt();
            shifts.push(MeanShift {
                eta_a: etas[w],
                eta_b: etas[w + 1],
                mean_a: ma,
                mean_b: mb,
                se_a: sa,
                se_b: sb,
                shift,
                combined_se: combined,
                significant_at_2se: shift > 2.0 * combined,
            });
            println!(
                "mean shift eta {} -> {}: {:.4} ({}signficant at 2 combined SE)",
                etas[w],
                etas[w + 1],
                shift,
                if shift > 2.0 * combined { "" } else { "not " }
            );
        }
        write_json(&spec.output_dir.join("mean_shift.json"), &shifts)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bias
// ---------------------------------------------------------------------------

pub fn cmd_bias(spec: &RunSpec, force: bool, trace_stride: u64) -> Result<(), CliError> {
    let BuiltRun {
        objective,
        noise,
        config,
        test_fns,
    } = build_run(spec)?;
    if objective.known_min().is_none() {
        return Err(CliError::Usage(format!(
            "objective `{}` has no known minimizer; bias mode supports \
             simplified-cauchy, simplified-bz, quadsine, quadratic",
            objective.name()
        )));
    }
    let etas: Vec<f64> = if spec.experiment.etas.is_empty() {
        vec![0.05, 0.1, 0.2, 0.3]
    } else {
        spec.experiment.etas.clone()
    };
    check_cap(objective.as_ref(), &noise, &etas, force)?;
    ensure_dir(&spec.output_dir)?;
    write_resolved_config(spec)?;
    let phi = &test_fns[0];

    let curve = bias_sweep(
        objective.as_ref(),
        &noise,
        phi,
        &etas,
        &config,
        spec.experiment.n_reps,
        spec.sgd.seed,
        None,
    )
    .map_err(stats_err)?;
    write_json(&spec.output_dir.join("bias_curve.json"), &curve)?;
    for (i, &eta) in curve.etas.iter().enumerate() {
        println!(
            "eta={eta}: bias {:.6} (se {:.2e})",
            curve.bias[i], curve.se[i]
        );
    }
    println!(
        "fitted log-log exponent: {:.4} over {} smallest step sizes",
        curve.fitted_exponent, curve.fit_points
    );

    // the per-iteration trace starts at iteration 1 (no burn-in) so the
    // transient the figure shows is visible
    let trace_path = spec.output_dir.join("bias_trace.csv");
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&trace_path)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", trace_path.display())))?,
    );
    writeln!(file, "eta,k,bias").map_err(|e| CliError::Usage(e.to_string()))?;
    for &eta in &etas {
        let mut cfg = config.clone().with_eta(eta);
        cfg.burn_in = 0;
        let trace = bias_trace(
            objective.as_ref(),
            &noise,
            &cfg,
            phi,
            spec.experiment.n_reps,
            spec.sgd.seed,
            trace_stride,
        )
        .map_err(stats_err)?;
        for (k, gap) in trace.ks.iter().zip(&trace.gap) {
            writeln!(file, "{eta},{k},{gap}").map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    file.flush().map_err(|e| CliError::Usage(e.to_string()))?;
    println!("wrote {}", trace_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// variance
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VarianceReport {
    strategy: String,
    phi: String,
    eta: f64,
    sigma2_hat: f64,
    mean: f64,
    ci_lo: f64,
    ci_hi: f64,
    level: f64,
    n_iters_recorded: u64,
    batch_len: Option<usize>,
    n_reps: Option<usize>,
}

pub fn cmd_variance(
    spec: &RunSpec,
    strategy: &str,
    batch_len: Option<usize>,
    force: bool,
) -> Result<(), CliError> {
    let BuiltRun {
        objective,
        noise,
        config,
        test_fns,
    } = build_run(spec)?;
    check_cap(objective.as_ref(), &noise, &[config.eta], force)?;
    ensure_dir(&spec.output_dir)?;
    write_resolved_config(spec)?;
    let phi = &test_fns[0];
    let level = spec.experiment.level;
    let n = config.n_recorded();

    let report = match strategy {
        "batch-means" => {
            let traj = sgd::run_trajectory(
                objective.as_ref(),
                &noise,
                &config,
                std::slice::from_ref(phi),
                0,
                RecordOptions {
                    store_iterates: false,
                    store_phi_series: true,
                },
            )
            .map_err(|e| CliError::Numerical(e.to_string()))?;
            let bl = batch_len.unwrap_or_else(|| default_batch_len(n as usize));
            let sigma2 = asymp_var_batch_means(&traj, 0, bl).map_err(stats_err)?;
            let mean = traj.mean_phi(0);
            let (lo, hi) = confidence_interval(mean, sigma2, n, level).map_err(stats_err)?;
            VarianceReport {
                strategy: strategy.to_string(),
                phi: phi.name(),
                eta: config.eta,
                sigma2_hat: sigma2,
                mean,
                ci_lo: lo,
                ci_hi: hi,
                level,
                n_iters_recorded: n,
                batch_len: Some(bl),
                n_reps: None,
            }
        }
        "replication" => {
            let n_reps = spec.experiment.n_reps;
            let ensemble = clt_experiment(
                objective.as_ref(),
                &noise,
                &config,
                phi,
                n_reps,
                spec.sgd.seed,
            )
            .map_err(stats_err)?;
            // scaled sums are n^{-1/2} Σ φ; trajectory means are those / sqrt(n)
            let sqrt_n = (n as f64).sqrt();
            let means: Vec<f64> = ensemble.values.iter().map(|v| v / sqrt_n).collect();
            let (pi_hat, _) = ensemble_mean_se(&means);
            let centered: Vec<f64> = means
                .iter()
                .map(|m| (m - pi_hat) * sqrt_n)
                .collect();
            let sigma2 = asymp_var_replication(&centered).map_err(stats_err)?;
            let (lo, hi) =
                confidence_interval(pi_hat, sigma2, n * n_reps as u64, level)
                    .map_err(stats_err)?;
            VarianceReport {
                strategy: strategy.to_string(),
                phi: phi.name(),
                eta: config.eta,
                sigma2_hat: sigma2,
                mean: pi_hat,
                ci_lo: lo,
                ci_hi: hi,
                level,
                n_iters_recorded: n,
                batch_len: None,
                n_reps: Some(n_reps),
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown strategy `{other}` (batch-means, replication)"
            )))
        }
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    write_json(
        &spec
            .output_dir
            .join(format!("variance_{strategy}.json")),
        &report,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

pub struct CheckArgs {
    pub assumptions: Vec<String>,
    pub radius: f64,
    pub samples: usize,
    pub alpha: Option<f64>,
    pub r_local: Option<f64>,
    pub seed: u64,
}

pub fn cmd_check(spec: &RunSpec, args: &CheckArgs) -> Result<(), CliError> {
    let built = sgdchain::make_objective::<f64>(&spec.objective).map_err(CliError::usage)?;
    let objective = built.objective;
    ensure_dir(&spec.output_dir)?;
    let stream = RngStream::new(args.seed, 0);
    let mut all_certified = true;

    for assumption in &args.assumptions {
        let cert: Certificate = match assumption.as_str() {
            "growth" => {
                let out = check_linear_growth(
                    objective.as_ref(),
                    args.radius,
                    args.samples,
                    &stream,
                )
                .map_err(|e| CliError::Numerical(e.to_string()))?;
                println!("growth: L_hat = {:.6}", out.l_hat);
                out.certificate
            }
            "dissipativity" => {
                let out = check_dissipativity(
                    objective.as_ref(),
                    args.radius,
                    args.samples,
                    &stream,
                    args.alpha,
                )
                .map_err(|e| match e {
                    TheoryError::NotCertifiable { .. } => CliError::Certification(e.to_string()),
                    other => CliError::Numerical(other.to_string()),
                })?;
                println!(
                    "dissipativity: alpha = {}, beta_hat = {:.6}",
                    out.alpha_hat, out.beta_hat
                );
                out.certificate
            }
            "localized-dissipativity" | "lojasiewicz" => {
                let constants = objective.constants();
                let g = constants.g_spec.clone().ok_or_else(|| {
                    CliError::Usage(format!(
                        "objective `{}` declares no local growth function",
                        objective.name()
                    ))
                })?;
                let r = args
                    .r_local
                    .or(constants.r_local)
                    .unwrap_or(2.0);
                let kind = if assumption == "lojasiewicz" {
                    GrowthCheckKind::Lojasiewicz
                } else {
                    GrowthCheckKind::LocalizedDissipativity
                };
                check_local_growth(
                    objective.as_ref(),
                    kind,
                    &g,
                    r,
                    args.samples,
                    &stream,
                )
                .map_err(|e| CliError::Usage(e.to_string()))?
            }
            "convexity" => {
                // certified means convex: no negative-curvature direction found
                match hessian_negativity_witness(objective.as_ref()) {
                    Ok(w) => Certificate {
                        assumption: "convexity".to_string(),
                        params: serde_json::json!({
                            "witness_norm": w.theta.norm(),
                            "quadratic_form": w.value,
                        }),
                        n_samples: 0,
                        violations: vec![sgdchain::theory::ViolationRecord {
                            theta: w.theta.to_f64_vec(),
                            lhs: w.value,
                            rhs: 0.0,
                        }],
                        certified: false,
                    },
                    Err(_) => Certificate {
                        assumption: "convexity".to_string(),
                        params: serde_json::json!({
                            "grid": "radial |theta| in [0.5, 3] step 0.01",
                        }),
                        n_samples: 0,
                        violations: vec![],
                        certified: true,
                    },
                }
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown assumption `{other}` (growth, dissipativity, \
                     localized-dissipativity, lojasiewicz, convexity)"
                )))
            }
        };
        println!(
            "{}: {}",
            assumption,
            if cert.certified { "CERTIFIED" } else { "NOT CERTIFIED" }
        );
        all_certified &= cert.certified;
        write_json(
            &spec.output_dir.join(format!("check_{assumption}.json")),
            &cert,
        )?;
    }
    if all_certified {
        Ok(())
    } else {
        Err(CliError::Certification(
            "one or more assumptions not certified".into(),
        ))
    }
}

// ---------------------------------------------------------------------------
// constants
// ---------------------------------------------------------------------------

pub struct ConstantsArgs {
    pub l: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub l_xi: Option<f64>,
    pub l_tilde: Option<f64>,
    pub theta_star_norm: Option<f64>,
    pub eta: Option<f64>,
    pub mu2_empirical: Option<f64>,
}

#[derive(Serialize)]
struct ConstantsReport {
    l: f64,
    alpha: f64,
    beta: f64,
    l_xi: f64,
    theta_star_norm: f64,
    c_l_alpha: f64,
    c_dagger: f64,
    l_bar: f64,
    l_dagger: f64,
    overall_max_step: f64,
    mu2: f64,
    mu2_source: String,
    mu4: f64,
    bias_constant_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_const: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grad_domination_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grad_domination_bias_bound: Option<f64>,
}

pub fn cmd_constants(
    spec: Option<&RunSpec>,
    args: &ConstantsArgs,
) -> Result<(), CliError> {
    // constants supplied directly win; an objective (plus noise) fills gaps
    let mut l = args.l;
    let mut alpha = args.alpha;
    let mut beta = args.beta;
    let mut l_xi = args.l_xi;
    let mut l_tilde = args.l_tilde;
    let mut ts_norm = args.theta_star_norm;
    let mut g_spec = None;
    if let Some(spec) = spec {
        let built = sgdchain::make_objective::<f64>(&spec.objective).map_err(CliError::usage)?;
        let c = built.objective.constants();
        l = l.or(Some(c.l));
        alpha = alpha.or(Some(c.alpha));
        beta = beta.or(Some(c.beta));
        l_tilde = l_tilde.or(c.l_tilde);
        ts_norm = ts_norm.or_else(|| built.objective.known_min().map(|p| p.norm()));
        g_spec = c.g_spec.clone();
        if l_xi.is_none() {
            let noise = match &spec.noise {
                crate::spec::NoiseSpec::Gaussian { sigma } => {
                    Some(NoiseModel::gaussian(*sigma).map_err(CliError::usage)?)
                }
                crate::spec::NoiseSpec::StudentT { df, scale } => {
                    Some(NoiseModel::student_t(*df, *scale).map_err(CliError::usage)?)
                }
                _ => None,
            };
            l_xi = noise.and_then(|n| n.l_xi(built.objective.dim()));
        }
    }
    let (l, alpha) = match (l, alpha) {
        (Some(l), Some(a)) => (l, a),
        _ => {
            return Err(CliError::Usage(
                "missing required constants: provide --l and --alpha (and usually \
                 --beta, --l-xi), or --objective to derive them"
                    .into(),
            ))
        }
    };
    let beta = beta.unwrap_or(0.0);
    let l_xi = l_xi.unwrap_or(0.0);
    let ts_norm = ts_norm.unwrap_or(0.0);

    let bounds = step_size_bounds(l, alpha, beta, l_xi, ts_norm);
    let (mu2, mu2_source) = match args.mu2_empirical {
        Some(v) => (v, "empirical".to_string()),
        None => (mu2_bound(alpha, beta), "closed-form-bound".to_string()),
    };
    let mu4 = mu4_bound(l, alpha, beta, l_xi);
    let c4 = stationary_bias_constant(l, l_xi, alpha, beta, mu2, ts_norm);

    let mut report = ConstantsReport {
        l,
        alpha,
        beta,
        l_xi,
        theta_star_norm: ts_norm,
        c_l_alpha: bounds.c_l_alpha,
        c_dagger: bounds.c_dagger,
        l_bar: bounds.l_bar,
        l_dagger: bounds.l_dagger,
        overall_max_step: bounds.overall_max,
        mu2,
        mu2_source,
        mu4,
        bias_constant_c: c4,
        d_const: None,
        rho: None,
        grad_domination_m: None,
        grad_domination_bias_bound: None,
    };
    if let Some(eta) = args.eta {
        let decay = bias_decay_constants(l, alpha, beta, l_xi, ts_norm, eta)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        report.d_const = Some(decay.d_const);
        report.rho = Some(decay.rho);
        if let (Some(lt), Some(g)) = (l_tilde, g_spec.as_ref()) {
            let t5 = grad_domination_bias(l, lt, l_xi, alpha, beta, mu2, eta, g)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            report.grad_domination_m = Some(t5.m_big);
            report.grad_domination_bias_bound = Some(t5.bias_bound);
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}


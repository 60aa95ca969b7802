//! `sgdchain`: constant step size SGD experiments from the command line.
//!
//! Exit codes: 0 success/certified, 1 usage error, 2 numerical failure
//! (divergence), 3 certification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sgdchain_cli::spec::{build_objective_spec, NoiseSpec, RunSpec, Theta0};
use sgdchain_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "sgdchain",
    version,
    about = "Constant step size SGD as a Markov chain: runs, CLT and bias \
             experiments, variance estimation, assumption certificates, and \
             closed-form constants"
)]
struct Cli {
    /// Worker threads (default: all cores, or the SGDCHAIN_WORKERS env var)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the experiment commands; every flag overrides the
/// corresponding config-file key.
#[derive(Args, Clone, Default)]
struct SpecArgs {
    /// Config file in `key = value` form (see README)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Objective: cauchy-mle, simplified-cauchy, bz-mle, simplified-bz,
    /// quadsine, quadratic
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// Localized-growth radius R of simplified-bz
    #[arg(long)]
    r_local: Option<f64>,
    /// Dataset CSV (its sidecar <stem>.meta.json must sit next to it)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Quadratic center, comma-separated
    #[arg(long)]
    center: Option<String>,
    /// Noise kind: none, gaussian, student-t, minibatch
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    df: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    n_iters: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    /// Start point: one value fills the whole vector, or comma-separated coords
    #[arg(long)]
    theta0: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Test functions, comma-separated: norm, coord:<i>, sigmoid-of-f
    #[arg(long)]
    test_fns: Option<String>,
    /// Replications per experiment cell
    #[arg(long)]
    n_reps: Option<usize>,
    /// Step-size grid, comma-separated
    #[arg(long)]
    etas: Option<String>,
    #[arg(long)]
    skew_tol: Option<f64>,
    #[arg(long)]
    kurt_tol: Option<f64>,
    /// Confidence level in (0,1)
    #[arg(long)]
    level: Option<f64>,
    /// Second initialization for cross-initialization comparisons
    #[arg(long)]
    theta0_alt: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even when a step size exceeds the theoretical cap
    #[arg(long)]
    force: bool,
}

impl SpecArgs {
    fn resolve(&self) -> Result<RunSpec, CliError> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read {}: {e}", path.display()))
                })?;
                RunSpec::parse(&text)?
            }
            None => RunSpec::default(),
        };

        let objective_touched = self.objective.is_some()
            || self.dim.is_some()
            || self.lambda.is_some()
            || self.nu.is_some()
            || self.r_local.is_some()
            || self.dataset.is_some()
            || self.center.is_some();
        if objective_touched {
            use sgdchain::objectives::ObjectiveSpec as O;
            // start from the config's objective, overlay the flags
            let (name, mut dim, mut lambda, mut nu, mut r_local, mut dataset, mut center) =
                match &spec.objective {
                    O::CauchyRegMle { dataset, lambda } => (
                        "cauchy-mle",
                        None,
                        Some(*lambda),
                        None,
                        None,
                        Some(dataset.clone()),
                        None,
                    ),
                    O::SimplifiedCauchy { dim, lambda } => (
                        "simplified-cauchy",
                        Some(*dim),
                        Some(*lambda),
                        None,
                        None,
                        None,
                        None,
                    ),
                    O::BlakeZisserman {
                        dataset,
                        lambda,
                        nu,
                    } => (
                        "bz-mle",
                        None,
                        Some(*lambda),
                        Some(*nu),
                        None,
                        Some(dataset.clone()),
                        None,
                    ),
                    O::SimplifiedBz {
                        dim,
                        lambda,
                        nu,
                        r_local,
                    } => (
                        "simplified-bz",
                        Some(*dim),
                        Some(*lambda),
                        Some(*nu),
                        Some(*r_local),
                        None,
                        None,
                    ),
                    O::QuadSine => ("quadsine", None, None, None, None, None, None),
                    O::Quadratic { center } => (
                        "quadratic",
                        Some(center.len()),
                        None,
                        None,
                        None,
                        None,
                        Some(center.clone()),
                    ),
                };
            let name = self.objective.as_deref().unwrap_or(name);
            dim = self.dim.or(dim);
            lambda = self.lambda.or(lambda);
            nu = self.nu.or(nu);
            r_local = self.r_local.or(r_local);
            dataset = self.dataset.clone().or(dataset);
            if let Some(c) = &self.center {
                center = Some(
                    c.split(',')
                        .map(|p| {
                            p.trim().parse::<f64>().map_err(|_| {
                                CliError::Usage(format!("bad center entry `{p}`"))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            spec.objective =
                build_objective_spec(name, dim, lambda, nu, r_local, dataset, center)?;
        }

        if let Some(kind) = &self.noise {
            spec.noise = match kind.as_str() {
                "none" => NoiseSpec::None,
                "gaussian" => NoiseSpec::Gaussian {
                    sigma: self.sigma.unwrap_or(1.0),
                },
                "student-t" => NoiseSpec::StudentT {
                    df: self.df.unwrap_or(5.0),
                    scale: self.scale.unwrap_or(1.0),
                },
                "minibatch" => NoiseSpec::Minibatch,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown noise kind `{other}` (none, gaussian, student-t, minibatch)"
                    )))
                }
            };
        } else {
            match (&mut spec.noise, self.sigma, self.df, self.scale) {
                (NoiseSpec::Gaussian { sigma }, Some(s), _, _) => *sigma = s,
                (NoiseSpec::StudentT { df, scale }, _, d, s) => {
                    if let Some(d) = d {
                        *df = d;
                    }
                    if let Some(s) = s {
                        *scale = s;
                    }
                }
                _ => {}
            }
        }

        if let Some(v) = self.eta {
            spec.sgd.eta = v;
        }
        if let Some(v) = self.n_iters {
            spec.sgd.n_iters = v;
        }
        if let Some(v) = self.burn_in {
            spec.sgd.burn_in = v;
        }
        if let Some(v) = &self.theta0 {
            spec.sgd.theta0 = parse_theta0(v)?;
        }
        if let Some(v) = self.seed {
            spec.sgd.seed = v;
        }
        if let Some(v) = self.batch_size {
            spec.sgd.batch_size = v;
        }
        if let Some(v) = &self.test_fns {
            spec.test_fns = RunSpec::parse(&format!("test.fns = {v}"))?.test_fns;
        }
        if let Some(v) = self.n_reps {
            spec.experiment.n_reps = v;
        }
        if let Some(v) = &self.etas {
            spec.experiment.etas = v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad eta `{p}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
        }
        if let Some(v) = self.skew_tol {
            spec.experiment.skew_tol = v;
        }
        if let Some(v) = self.kurt_tol {
            spec.experiment.kurt_tol = v;
        }
        if let Some(v) = self.level {
            spec.experiment.level = v;
        }
        if let Some(v) = &self.theta0_alt {
            spec.experiment.theta0_alt = Some(parse_theta0(v)?);
        }
        if let Some(v) = &self.out {
            spec.output_dir = v.clone();
        }
        Ok(spec)
    }
}

fn parse_theta0(s: &str) -> Result<Theta0, CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad theta0 entry `{p}`")))
        })
        .collect::<Result<_, _>>()?;
    Ok(if parts.len() == 1 {
        Theta0::Fill(parts[0])
    } else {
        Theta0::Coords(parts)
    })
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic regression dataset (CSV + sidecar JSON)
    GenerateData {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        /// Degrees of freedom of the response noise
        #[arg(long, default_value_t = 10.0)]
        noise_df: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// File stem (default regdata_m<m>_d<d>_seed<seed>)
        #[arg(long)]
        name: Option<String>,
    },
    /// Run one SGD trajectory and print its summary
    Run {
        #[command(flatten)]
        args: SpecArgs,
        /// Dump post-burn-in iterates as CSV `k,theta_1,...,theta_d`
        #[arg(long)]
        dump_iterates: Option<PathBuf>,
    },
    /// Replicated scaled-partial-sum ensembles with normality diagnostics
    Clt {
        #[command(flatten)]
        args: SpecArgs,
    },
    /// Asymptotic-bias sweep over step sizes plus per-iteration traces
    Bias {
        #[command(flatten)]
        args: SpecArgs,
        /// Checkpoint stride of the per-iteration trace
        #[arg(long, default_value_t = 50)]
        trace_stride: u64,
    },
    /// Estimate the asymptotic variance and a confidence interval
    Variance {
        #[command(flatten)]
        args: SpecArgs,
        /// batch-means or replication
        #[arg(long)]
        strategy: String,
        /// Batch length (batch-means only; default sqrt(n) rounded to a
        /// power of two)
        #[arg(long)]
        batch_len: Option<usize>,
    },
    /// Certify regularity assumptions by sampling
    Check {
        #[command(flatten)]
        args: SpecArgs,
        /// Comma-separated: growth, dissipativity, localized-dissipativity,
        /// lojasiewicz, convexity
        #[arg(long)]
        assumption: String,
        #[arg(long, default_value_t = 50.0)]
        radius: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Candidate dissipativity alpha (default: the declared constant)
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Closed-form constants: step-size caps, moment bounds, bias constants
    Constants {
        #[command(flatten)]
        args: SpecArgs,
        #[arg(long)]
        l: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        l_xi: Option<f64>,
        #[arg(long)]
        l_tilde: Option<f64>,
        #[arg(long)]
        theta_star_norm: Option<f64>,
        /// Empirical second moment to use instead of the closed-form bound
        #[arg(long)]
        mu2: Option<f64>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateData {
            m,
            d,
            noise_df,
            seed,
            out,
            name,
        } => commands::cmd_generate_data(m, d, noise_df, seed, &out, name),
        Command::Run {
            args,
            dump_iterates,
        } => {
            let spec = args.resolve()?;
            commands::cmd_run(&spec, dump_iterates, args.force)
        }
        Command::Clt { args } => {
            let spec = args.resolve()?;
            commands::cmd_clt(&spec, args.force)
        }
        Command::Bias { args, trace_stride } => {
            let spec = args.resolve()?;
            commands::cmd_bias(&spec, args.force, trace_stride)
        }
        Command::Variance {
            args,
            strategy,
            batch_len,
        } => {
            let spec = args.resolve()?;
            commands::cmd_variance(&spec, &strategy, batch_len, args.force)
        }
        Command::Check {
            args,
            assumption,
            radius,
            samples,
            alpha,
        } => {
            let spec = args.resolve()?;
            let check_args = commands::CheckArgs {
                assumptions: assumption
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .collect(),
                radius,
                samples,
                alpha,
                r_local: args.r_local,
                seed: args.seed.unwrap_or(spec.sgd.seed),
            };
            commands::cmd_check(&spec, &check_args)
        }
        Command::Constants {
            args,
            l,
            alpha,
            beta,
            l_xi,
            l_tilde,
            theta_star_norm,
            mu2,
        } => {
            let spec = if args.config.is_some() || args.objective.is_some() {
                Some(args.resolve()?)
            } else {
                None
            };
            let cargs = commands::ConstantsArgs {
                l,
                alpha,
                beta,
                l_xi,
                l_tilde,
                theta_star_norm,
                eta: args.eta,
                mu2_empirical: mu2,
            };
            commands::cmd_constants(spec.as_ref(), &cargs)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers.or_else(|| {
        std::env::var("SGDCHAIN_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} workers: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

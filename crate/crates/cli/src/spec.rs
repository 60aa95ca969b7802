//! The run specification: everything a command needs, read from a flat
//! `key = value` config file with dotted section prefixes. CLI flags
//! override file values; serialization round-trips losslessly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use sgdchain::objectives::ObjectiveSpec;
use sgdchain::{NoiseModel, Objective, Point, SgdConfig, TestFunction};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Theta0 {
    /// constant vector of the objective's dimension
    Fill(f64),
    Coords(Vec<f64>),
}

impl Theta0 {
    pub fn to_point(&self, dim: usize) -> Result<Point<f64>, CliError> {
        match self {
            Theta0::Fill(v) => Point::filled(dim, *v).map_err(CliError::usage),
            Theta0::Coords(c) => {
                if c.len() != dim {
                    return Err(CliError::Usage(format!(
                        "theta0 has {} coordinates but the objective has dimension {dim}",
                        c.len()
                    )));
                }
                Point::new(c.clone()).map_err(CliError::usage)
            }
        }
    }

    fn serialize(&self) -> String {
        match self {
            Theta0::Fill(v) => format!("{v}"),
            Theta0::Coords(c) => c
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(","),
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() == 1 {
            Ok(Theta0::Fill(parse_f64("theta0", parts[0])?))
        } else {
            Ok(Theta0::Coords(
                parts
                    .iter()
                    .map(|p| parse_f64("theta0", p))
                    .collect::<Result<_, _>>()?,
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    None,
    Gaussian { sigma: f64 },
    StudentT { df: f64, scale: f64 },
    Minibatch,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TestFnSpec {
    Norm,
    Coordinate(usize),
    SigmoidOfF,
}

impl TestFnSpec {
    pub fn build(&self) -> TestFunction<f64> {
        match self {
            TestFnSpec::Norm => TestFunction::norm(),
            TestFnSpec::Coordinate(i) => TestFunction::coordinate(*i),
            TestFnSpec::SigmoidOfF => TestFunction::sigmoid_of_f(),
        }
    }

    fn serialize(&self) -> String {
        match self {
            TestFnSpec::Norm => "norm".to_string(),
            TestFnSpec::Coordinate(i) => format!("coord:{i}"),
            TestFnSpec::SigmoidOfF => "sigmoid-of-f".to_string(),
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "norm" => Ok(TestFnSpec::Norm),
            "sigmoid-of-f" => Ok(TestFnSpec::SigmoidOfF),
            other => {
                if let Some(i) = other.strip_prefix("coord:") {
                    Ok(TestFnSpec::Coordinate(i.parse().map_err(|_| {
                        CliError::Usage(format!("bad coordinate index in `{other}`"))
                    })?))
                } else {
                    Err(CliError::Usage(format!(
                        "unknown test function `{other}` (norm, coord:<i>, sigmoid-of-f)"
                    )))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgdParams {
    pub eta: f64,
    pub n_iters: u64,
    pub burn_in: u64,
    pub theta0: Theta0,
    pub seed: u64,
    pub batch_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentParams {
    pub n_reps: usize,
    pub etas: Vec<f64>,
    pub skew_tol: f64,
    pub kurt_tol: f64,
    pub level: f64,
    /// second initialization for the cross-initialization comparison
    pub theta0_alt: Option<Theta0>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub objective: ObjectiveSpec,
    pub noise: NoiseSpec,
    pub sgd: SgdParams,
    pub test_fns: Vec<TestFnSpec>,
    pub experiment: ExperimentParams,
    pub output_dir: PathBuf,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            objective: ObjectiveSpec::SimplifiedCauchy {
                dim: 10,
                lambda: 0.1,
            },
            noise: NoiseSpec::StudentT { df: 5.0, scale: 1.0 },
            sgd: SgdParams {
                eta: 0.3,
                n_iters: 21_000,
                burn_in: 1000,
                theta0: Theta0::Fill(1.0),
                seed: 1,
                batch_size: 1,
            },
            test_fns: vec![TestFnSpec::Norm],
            experiment: ExperimentParams {
                n_reps: 1000,
                etas: vec![],
                skew_tol: 0.15,
                kurt_tol: 0.3,
                level: 0.95,
                theta0_alt: None,
            },
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Usage(format!("{key}: not a number: `{s}`")))
}

fn parse_u64(key: &str, s: &str) -> Result<u64, CliError> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| CliError::Usage(format!("{key}: not an integer: `{s}`")))
}

fn parse_usize(key: &str, s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| CliError::Usage(format!("{key}: not an integer: `{s}`")))
}

impl RunSpec {
    /// Serialize as `key = value` lines with dotted section prefixes.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("objective.name", self.objective.name().to_string());
        match &self.objective {
            ObjectiveSpec::CauchyRegMle { dataset, lambda } => {
                kv("objective.dataset", dataset.display().to_string());
                kv("objective.lambda", format!("{lambda}"));
            }
            ObjectiveSpec::SimplifiedCauchy { dim, lambda } => {
                kv("objective.dim", format!("{dim}"));
                kv("objective.lambda", format!("{lambda}"));
            }
            ObjectiveSpec::BlakeZisserman {
                dataset,
                lambda,
                nu,
            } => {
                kv("objective.dataset", dataset.display().to_string());
                kv("objective.lambda", format!("{lambda}"));
                kv("objective.nu", format!("{nu}"));
            }
            ObjectiveSpec::SimplifiedBz {
                dim,
                lambda,
                nu,
                r_local,
            } => {
                kv("objective.dim", format!("{dim}"));
                kv("objective.lambda", format!("{lambda}"));
                kv("objective.nu", format!("{nu}"));
                kv("objective.r_local", format!("{r_local}"));
            }
            ObjectiveSpec::QuadSine => {}
            ObjectiveSpec::Quadratic { center } => {
                kv(
                    "objective.center",
                    center
                        .iter()
                        .map(|v| format!("{v}"))
                        .collect::<Vec<_>>()
                        .join(","),
                );
            }
        }
        match &self.noise {
            NoiseSpec::None => kv("noise.kind", "none".to_string()),
            NoiseSpec::Gaussian { sigma } => {
                kv("noise.kind", "gaussian".to_string());
                kv("noise.sigma", format!("{sigma}"));
            }
            NoiseSpec::StudentT { df, scale } => {
                kv("noise.kind", "student-t".to_string());
                kv("noise.df", format!("{df}"));
                kv("noise.scale", format!("{scale}"));
            }
            NoiseSpec::Minibatch => kv("noise.kind", "minibatch".to_string()),
        }
        kv("sgd.eta", format!("{}", self.sgd.eta));
        kv("sgd.n_iters", format!("{}", self.sgd.n_iters));
        kv("sgd.burn_in", format!("{}", self.sgd.burn_in));
        kv("sgd.theta0", self.sgd.theta0.serialize());
        kv("sgd.seed", format!("{}", self.sgd.seed));
        kv("sgd.batch_size", format!("{}", self.sgd.batch_size));
        kv(
            "test.fns",
            self.test_fns
                .iter()
                .map(TestFnSpec::serialize)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("experiment.n_reps", format!("{}", self.experiment.n_reps));
        if !self.experiment.etas.is_empty() {
            kv(
                "experiment.etas",
                self.experiment
                    .etas
                    .iter()
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        kv("experiment.skew_tol", format!("{}", self.experiment.skew_tol));
        kv("experiment.kurt_tol", format!("{}", self.experiment.kurt_tol));
        kv("experiment.level", format!("{}", self.experiment.level));
        if let Some(alt) = &self.experiment.theta0_alt {
            kv("experiment.theta0_alt", alt.serialize());
        }
        kv("output.dir", self.output_dir.display().to_string());
        out
    }

    /// Parse the `key = value` format. Unknown keys are an error; absent
    /// keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_map(map)
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut spec = RunSpec::default();
        let mut take = |k: &str| map.remove(k);

        if let Some(name) = take("objective.name") {
            let dim = take("objective.dim")
                .map(|s| parse_usize("objective.dim", &s))
                .transpose()?;
            let lambda = take("objective.lambda")
                .map(|s| parse_f64("objective.lambda", &s))
                .transpose()?;
            let nu = take("objective.nu")
                .map(|s| parse_f64("objective.nu", &s))
                .transpose()?;
            let r_local = take("objective.r_local")
                .map(|s| parse_f64("objective.r_local", &s))
                .transpose()?;
            let dataset = take("objective.dataset").map(PathBuf::from);
            let center = take("objective.center")
                .map(|s| {
                    s.split(',')
                        .map(|p| parse_f64("objective.center", p))
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()?;
            spec.objective = build_objective_spec(
                &name,
                dim,
                lambda,
                nu,
                r_local,
                dataset,
                center,
            )?;
        }

        match take("noise.kind").as_deref() {
            None => {}
            Some("none") => spec.noise = NoiseSpec::None,
            Some("gaussian") => {
                let sigma = take("noise.sigma")
                    .map(|s| parse_f64("noise.sigma", &s))
                    .transpose()?
                    .unwrap_or(1.0);
                spec.noise = NoiseSpec::Gaussian { sigma };
            }
            Some("student-t") => {
                let df = take("noise.df")
                    .map(|s| parse_f64("noise.df", &s))
                    .transpose()?
                    .unwrap_or(5.0);
                let scale = take("noise.scale")
                    .map(|s| parse_f64("noise.scale", &s))
                    .transpose()?
                    .unwrap_or(1.0);
                spec.noise = NoiseSpec::StudentT { df, scale };
            }
            Some("minibatch") => spec.noise = NoiseSpec::Minibatch,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown noise kind `{other}` (none, gaussian, student-t, minibatch)"
                )))
            }
        }

        if let Some(v) = take("sgd.eta") {
            spec.sgd.eta = parse_f64("sgd.eta", &v)?;
        }
        if let Some(v) = take("sgd.n_iters") {
            spec.sgd.n_iters = parse_u64("sgd.n_iters", &v)?;
        }
        if let Some(v) = take("sgd.burn_in") {
            spec.sgd.burn_in = parse_u64("sgd.burn_in", &v)?;
        }
        if let Some(v) = take("sgd.theta0") {
            spec.sgd.theta0 = Theta0::parse(&v)?;
        }
        if let Some(v) = take("sgd.seed") {
            spec.sgd.seed = parse_u64("sgd.seed", &v)?;
        }
        if let Some(v) = take("sgd.batch_size") {
            spec.sgd.batch_size = parse_usize("sgd.batch_size", &v)?;
        }
        if let Some(v) = take("test.fns") {
            spec.test_fns = v
                .split(',')
                .map(|p| TestFnSpec::parse(p.trim()))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = take("experiment.n_reps") {
            spec.experiment.n_reps = parse_usize("experiment.n_reps", &v)?;
        }
        if let Some(v) = take("experiment.etas") {
            spec.experiment.etas = v
                .split(',')
                .map(|p| parse_f64("experiment.etas", p))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = take("experiment.skew_tol") {
            spec.experiment.skew_tol = parse_f64("experiment.skew_tol", &v)?;
        }
        if let Some(v) = take("experiment.kurt_tol") {
            spec.experiment.kurt_tol = parse_f64("experiment.kurt_tol", &v)?;
        }
        if let Some(v) = take("experiment.level") {
            spec.experiment.level = parse_f64("experiment.level", &v)?;
        }
        if let Some(v) = take("experiment.theta0_alt") {
            spec.experiment.theta0_alt = Some(Theta0::parse(&v)?);
        }
        if let Some(v) = take("output.dir") {
            spec.output_dir = PathBuf::from(v);
        }
        if let Some(k) = map.keys().next() {
            return Err(CliError::Usage(format!("unknown config key `{k}`")));
        }
        Ok(spec)
    }
}

pub fn build_objective_spec(
    name: &str,
    dim: Option<usize>,
    lambda: Option<f64>,
    nu: Option<f64>,
    r_local: Option<f64>,
    dataset: Option<PathBuf>,
    center: Option<Vec<f64>>,
) -> Result<ObjectiveSpec, CliError> {
    let lambda = lambda.unwrap_or(0.1);
    let nu = nu.unwrap_or(1.0);
    let dim = dim.unwrap_or(10);
    match name {
        "cauchy-mle" => Ok(ObjectiveSpec::CauchyRegMle {
            dataset: dataset.ok_or_else(|| {
                CliError::Usage("cauchy-mle needs objective.dataset (a CSV path)".into())
            })?,
            lambda,
        }),
        "simplified-cauchy" => Ok(ObjectiveSpec::SimplifiedCauchy { dim, lambda }),
        "bz-mle" => Ok(ObjectiveSpec::BlakeZisserman {
            dataset: dataset.ok_or_else(|| {
                CliError::Usage("bz-mle needs objective.dataset (a CSV path)".into())
            })?,
            lambda,
            nu,
        }),
        "simplified-bz" => Ok(ObjectiveSpec::SimplifiedBz {
            dim,
            lambda,
            nu,
            r_local: r_local.unwrap_or(2.0),
        }),
        "quadsine" => Ok(ObjectiveSpec::QuadSine),
        "quadratic" => Ok(ObjectiveSpec::Quadratic {
            center: center.unwrap_or_else(|| vec![0.0; dim]),
        }),
        other => Err(CliError::Usage(format!(
            "unknown objective `{other}` (cauchy-mle, simplified-cauchy, bz-mle, \
             simplified-bz, quadsine, quadratic)"
        ))),
    }
}

/// Everything the commands need, instantiated at `f64`.
pub struct BuiltRun {
    pub objective: Arc<dyn Objective<f64>>,
    pub noise: NoiseModel<f64>,
    pub config: SgdConfig<f64>,
    pub test_fns: Vec<TestFunction<f64>>,
}

pub fn build_run(spec: &RunSpec) -> Result<BuiltRun, CliError> {
    let built = sgdchain::make_objective::<f64>(&spec.objective).map_err(CliError::usage)?;
    let noise = match &spec.noise {
        NoiseSpec::None => NoiseModel::None,
        NoiseSpec::Gaussian { sigma } => {
            NoiseModel::gaussian(*sigma).map_err(CliError::usage)?
        }
        NoiseSpec::StudentT { df, scale } => {
            NoiseModel::student_t(*df, *scale).map_err(CliError::usage)?
        }
        NoiseSpec::Minibatch => {
            let sampled = built.sampled.clone().ok_or_else(|| {
                CliError::Usage(format!(
                    "objective `{}` has no per-sample gradients; minibatch noise needs \
                     a dataset-backed objective",
                    spec.objective.name()
                ))
            })?;
            NoiseModel::minibatch(sampled, spec.sgd.batch_size).map_err(CliError::usage)?
        }
    };
    let dim = built.objective.dim();
    let theta0 = spec.sgd.theta0.to_point(dim)?;
    let config = SgdConfig::new(
        spec.sgd.eta,
        spec.sgd.n_iters,
        spec.sgd.burn_in,
        theta0,
        spec.sgd.seed,
    )
    .with_batch_size(spec.sgd.batch_size);
    config.validate().map_err(CliError::usage)?;
    let test_fns: Vec<TestFunction<f64>> =
        spec.test_fns.iter().map(TestFnSpec::build).collect();
    if test_fns.is_empty() {
        return Err(CliError::Usage("at least one test function required".into()));
    }
    Ok(BuiltRun {
        objective: built.objective,
        noise,
        config,
        test_fns,
    })
}

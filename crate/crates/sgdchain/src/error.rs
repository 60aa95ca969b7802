//! Error types, one enum per subsystem.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("point must have at least one coordinate")]
    EmptyPoint,
    #[error("non-finite coordinate at index {index}")]
    NonFiniteCoordinate { index: usize },
    #[error("objective evaluation returned a non-finite value")]
    EvalFailure,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
}

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("unknown objective `{0}`")]
    UnknownName(String),
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("nu must be positive, got {0}")]
    NonPositiveNu(f64),
    #[error("dimension mismatch: X is {m}x{d} but y has {ny} entries")]
    DimensionMismatch { m: usize, d: usize, ny: usize },
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("objective `{objective}` requires a dataset")]
    MissingDataset { objective: String },
    #[error("no negative-curvature direction found on the search grid")]
    NoNegativityWitness,
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("per-sample gradient evaluation failed at index {index}")]
    SampleGradFailure { index: usize },
    #[error("noise draw produced a non-finite value")]
    NonFiniteDraw,
    #[error("invalid noise parameter: {0}")]
    InvalidParam(String),
    #[error("dataset I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset metadata: {0}")]
    Meta(String),
}

#[derive(Debug, Error)]
pub enum SgdError {
    #[error("divergence at iteration {k}: |theta| = {norm:e}")]
    Divergence { k: u64, norm: f64 },
    #[error("empty recording window: n_iters = burn_in = {burn_in}")]
    EmptyWindow { burn_in: u64 },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("step size {eta} is not below the {cap_name} cap {cap}")]
    StepSizeAboveCap {
        eta: f64,
        cap: f64,
        cap_name: &'static str,
    },
    #[error("step size {eta} reaches the pole 2/L_tilde = {pole}")]
    StepSizePole { eta: f64, pole: f64 },
    #[error("constant out of range: {0}")]
    BadConstant(String),
    #[error("objective has no known minimizer / minimum value")]
    MissingKnownMin,
    #[error("no positive alpha certifiable; worst offender |theta| = {worst_norm}")]
    NotCertifiable { worst_norm: f64 },
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("degenerate ensemble: zero variance")]
    DegenerateEnsemble,
    #[error("confidence level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("need at least {needed} whole batches, got {got}")]
    TooFewBatches { needed: usize, got: usize },
    #[error("trajectory was run without per-function series storage")]
    MissingPhiSeries,
    #[error("replications diverged for stream ids {stream_ids:?}")]
    Divergent { stream_ids: Vec<u64> },
    #[error("objective has no known minimizer; bias is undefined")]
    MissingKnownMin,
    #[error("step size {eta} exceeds the provided cap {cap}")]
    EtaAboveCap { eta: f64, cap: f64 },
    #[error(transparent)]
    Sgd(#[from] SgdError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

//! Constant step size SGD as a Markov chain: trajectory simulation over
//! dissipative non-convex objectives, Polyak-Ruppert averaging, normality
//! and bias experiments, closed-form admissibility and moment constants,
//! and sampling-based certificates for the regularity conditions.
//!
//! Everything numeric is generic over the [`Scalar`] floating-point type;
//! the `*64` aliases below are the instantiations the CLI uses.

pub mod config;
pub mod error;
pub mod noise;
pub mod objective;
pub mod objectives;
pub mod point;
pub mod scalar;
pub mod sgd;
pub mod stats;
pub mod theory;
pub mod trajectory;

pub use config::SgdConfig;
pub use error::{CoreError, NoiseError, ObjectiveError, SgdError, StatsError, TheoryError};
pub use noise::{NoiseModel, RegressionDataset, RngStream};
pub use objective::{
    finite_diff_grad, LocalGrowthFn, Objective, RegularityConstants, SampledObjective,
    TestFunction,
};
pub use objectives::{make_objective, BuiltObjective, ObjectiveSpec};
pub use point::Point;
pub use scalar::Scalar;
pub use trajectory::{RecordOptions, Trajectory};

/// `f64` instantiations of the core domain types.
pub type Point64 = Point<f64>;
pub type SgdConfig64 = SgdConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type NoiseModel64 = NoiseModel<f64>;
pub type TestFunction64 = TestFunction<f64>;
pub type RegularityConstants64 = RegularityConstants<f64>;
pub type LocalGrowthFn64 = LocalGrowthFn<f64>;

/// `f32` instantiations.
pub type Point32 = Point<f32>;
pub type SgdConfig32 = SgdConfig<f32>;
pub type NoiseModel32 = NoiseModel<f32>;

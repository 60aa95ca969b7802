//! Scalar abstraction: the whole library is generic over the floating-point
//! type; `f32` and `f64` are the supported instantiations.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, StandardUniform};

/// Floating-point scalar usable everywhere in this crate: ordinary float
/// arithmetic plus the primitive random draws the simulations need.
///
/// The sampling methods live here so that generic code never has to carry
/// `rand_distr` trait bounds around; the concrete impls discharge them.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Convert from `f64`, e.g. for literal constants in formulas.
    fn of_f64(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Convert to `f64` (used at reporting/serialization boundaries).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// One standard normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform draw on `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One chi-squared draw with `df` degrees of freedom (`df > 0`).
    fn chi_squared<R: Rng + ?Sized>(rng: &mut R, df: Self) -> Self;
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }

    fn chi_squared<R: Rng + ?Sized>(rng: &mut R, df: Self) -> Self {
        ChiSquared::new(df).expect("df > 0").sample(rng)
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }

    fn chi_squared<R: Rng + ?Sized>(rng: &mut R, df: Self) -> Self {
        ChiSquared::new(df).expect("df > 0").sample(rng)
    }
}

//! The objective-function abstraction: gradient oracle, optional Hessian,
//! declared regularity constants, and the test functions evaluated along
//! trajectories.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::CoreError;
use crate::point::{slice_norm, Point};
use crate::scalar::Scalar;

/// Regularity constants an objective declares about itself.
///
/// `l` bounds the gradient growth `|∇f(θ)| ≤ L(1+|θ|)`, `(alpha, beta)` is
/// the dissipativity pair `⟨θ,∇f(θ)⟩ ≥ α|θ|² − β`. The optional fields
/// cover the Hessian growth constant, the gradient-domination tail constant
/// with its local growth function, and the localized-dissipativity radius
/// and margin.
#[derive(Clone, Debug)]
pub struct RegularityConstants<T> {
    pub l: T,
    pub alpha: T,
    pub beta: T,
    pub l_xi: Option<T>,
    pub l_tilde: Option<T>,
    pub gamma: Option<T>,
    pub g_spec: Option<LocalGrowthFn<T>>,
    pub r_local: Option<T>,
    pub delta: Option<T>,
}

impl<T: Scalar> RegularityConstants<T> {
    pub fn new(l: T, alpha: T, beta: T) -> Self {
        Self {
            l,
            alpha,
            beta,
            l_xi: None,
            l_tilde: None,
            gamma: None,
            g_spec: None,
            r_local: None,
            delta: None,
        }
    }

    pub fn with_l_xi(mut self, l_xi: T) -> Self {
        self.l_xi = Some(l_xi);
        self
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(CoreError::InvalidConstant(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )))
            }
        };
        pos("L", self.l)?;
        pos("alpha", self.alpha)?;
        if self.beta < T::zero() || !self.beta.is_finite() {
            return Err(CoreError::InvalidConstant(format!(
                "beta must be nonnegative and finite, got {}",
                self.beta
            )));
        }
        if self.alpha > self.l {
            return Err(CoreError::InvalidConstant(format!(
                "alpha = {} exceeds L = {}; dissipativity with linear gradient growth forces alpha <= L",
                self.alpha, self.l
            )));
        }
        if let Some(v) = self.l_xi {
            pos("L_xi", v)?;
        }
        if let Some(v) = self.l_tilde {
            pos("L_tilde", v)?;
        }
        if let Some(v) = self.gamma {
            pos("gamma", v)?;
        }
        if let Some(v) = self.r_local {
            pos("R", v)?;
        }
        if let Some(v) = self.delta {
            pos("delta", v)?;
        }
        Ok(())
    }
}

/// Local growth function `g` from the localized-dissipativity and
/// generalized gradient-domination conditions: convex, `g(0) = 0`, strictly
/// increasing, with a usable inverse.
#[derive(Clone)]
pub struct LocalGrowthFn<T> {
    kind: GrowthKind<T>,
}

#[derive(Clone)]
enum GrowthKind<T> {
    /// `g(x) = c x`
    Linear { c: T },
    /// `g(x) = c x^p`, `p >= 1`
    Power { c: T, p: T },
    /// caller-supplied `g` and its inverse
    Custom {
        g: Arc<dyn Fn(T) -> T + Send + Sync>,
        g_inv: Arc<dyn Fn(T) -> T + Send + Sync>,
    },
}

impl<T: Scalar> LocalGrowthFn<T> {
    pub fn linear(c: T) -> Result<Self, CoreError> {
        if c <= T::zero() || !c.is_finite() {
            return Err(CoreError::InvalidConstant(format!(
                "growth coefficient must be positive, got {c}"
            )));
        }
        Ok(Self {
            kind: GrowthKind::Linear { c },
        })
    }

    pub fn power(c: T, p: T) -> Result<Self, CoreError> {
        if c <= T::zero() || !c.is_finite() {
            return Err(CoreError::InvalidConstant(format!(
                "growth coefficient must be positive, got {c}"
            )));
        }
        if p < T::one() || !p.is_finite() {
            return Err(CoreError::InvalidConstant(format!(
                "growth exponent must be >= 1 for convexity, got {p}"
            )));
        }
        Ok(Self {
            kind: GrowthKind::Power { c, p },
        })
    }

    pub fn custom(
        g: Arc<dyn Fn(T) -> T + Send + Sync>,
        g_inv: Arc<dyn Fn(T) -> T + Send + Sync>,
    ) -> Self {
        Self {
            kind: GrowthKind::Custom { g, g_inv },
        }
    }

    pub fn eval(&self, x: T) -> T {
        match &self.kind {
            GrowthKind::Linear { c } => *c * x,
            GrowthKind::Power { c, p } => *c * x.powf(*p),
            GrowthKind::Custom { g, .. } => g(x),
        }
    }

    pub fn inverse(&self, y: T) -> T {
        match &self.kind {
            GrowthKind::Linear { c } => y / *c,
            GrowthKind::Power { c, p } => (y / *c).powf(p.recip()),
            GrowthKind::Custom { g_inv, .. } => g_inv(y),
        }
    }

    /// Short description for reports, e.g. `g(x) = 0.1*x^2`.
    pub fn describe(&self) -> String {
        match &self.kind {
            GrowthKind::Linear { c } => format!("g(x) = {c}*x"),
            GrowthKind::Power { c, p } => format!("g(x) = {c}*x^{p}"),
            GrowthKind::Custom { .. } => "g(x) = <custom>".to_string(),
        }
    }
}

impl<T: Debug> Debug for LocalGrowthFn<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            GrowthKind::Linear { c } => write!(f, "g(x) = {c:?}*x"),
            GrowthKind::Power { c, p } => write!(f, "g(x) = {c:?}*x^{p:?}"),
            GrowthKind::Custom { .. } => f.write_str("g(x) = <custom>"),
        }
    }
}

/// A differentiable (a.e.) objective `f: R^d -> R` with gradient oracle.
///
/// Implementations must be pure: concurrent evaluation from many worker
/// threads must be safe, which `&self` methods plus `Send + Sync` enforce.
pub trait Objective<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// Short name for reports.
    fn name(&self) -> &'static str {
        "objective"
    }

    fn eval(&self, theta: &[T]) -> T;

    /// Write `∇f(θ)` into `out` (`out.len() == dim()`).
    fn grad_into(&self, theta: &[T], out: &mut [T]);

    fn grad(&self, theta: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.grad_into(theta, &mut out);
        out
    }

    /// Dense `d x d` Hessian in row-major order, where available.
    fn hessian(&self, _theta: &[T]) -> Option<Vec<T>> {
        None
    }

    /// The known global minimizer `θ*`, where one exists in closed form.
    fn known_min(&self) -> Option<Point<T>> {
        None
    }

    fn constants(&self) -> RegularityConstants<T>;
}

/// Objectives backed by a finite sample, exposing per-sample gradients
/// `∇F(θ, Z_j)` for mini-batch noise.
pub trait SampledObjective<T: Scalar>: Objective<T> {
    fn n_samples(&self) -> usize;

    /// Write `∇F(θ, Z_j)` into `out` for sample index `j`.
    fn per_sample_grad_into(&self, theta: &[T], j: usize, out: &mut [T]);
}

/// Quadratic form `uᵀ H u` for a row-major `d x d` matrix.
pub fn quad_form<T: Scalar>(h: &[T], u: &[T]) -> T {
    let d = u.len();
    debug_assert_eq!(h.len(), d * d);
    let mut acc = T::zero();
    for i in 0..d {
        let row = &h[i * d..(i + 1) * d];
        let mut hu = T::zero();
        for j in 0..d {
            hu += row[j] * u[j];
        }
        acc += u[i] * hu;
    }
    acc
}

/// Test functions `φ: R^d -> R` evaluated along trajectories.
///
/// Two different regularity constants are tracked because different results
/// need different ones: the ergodicity/CLT statements only require the
/// growth bound `|φ(θ)| ≤ c (1+|θ|)`, while the bias bounds require the
/// Lipschitz constant (or, for `φ = φ̃∘f`, the outer function's).
#[derive(Clone)]
pub struct TestFunction<T> {
    kind: TestKind<T>,
    lipschitz: Option<T>,
    growth: Option<T>,
}

#[derive(Clone)]
enum TestKind<T> {
    /// `φ(θ) = |θ|`
    Norm,
    /// `φ(θ) = θ_i`
    Coordinate(usize),
    /// `φ = φ̃ ∘ f` with `φ̃(x) = 1/(1+e^{-x})`; the stored Lipschitz
    /// constant is the outer function's, `L_φ̃ = 1/4`.
    SigmoidOfF,
    Custom {
        name: String,
        f: Arc<dyn Fn(&[T]) -> T + Send + Sync>,
    },
}

impl<T: Scalar> TestFunction<T> {
    pub fn norm() -> Self {
        Self {
            kind: TestKind::Norm,
            lipschitz: Some(T::one()),
            growth: Some(T::one()),
        }
    }

    pub fn coordinate(i: usize) -> Self {
        Self {
            kind: TestKind::Coordinate(i),
            lipschitz: Some(T::one()),
            growth: Some(T::one()),
        }
    }

    pub fn sigmoid_of_f() -> Self {
        Self {
            kind: TestKind::SigmoidOfF,
            lipschitz: Some(T::of_f64(0.25)),
            // the sigmoid output is bounded by 1
            growth: Some(T::one()),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        f: Arc<dyn Fn(&[T]) -> T + Send + Sync>,
        lipschitz: Option<T>,
    ) -> Self {
        Self {
            kind: TestKind::Custom {
                name: name.into(),
                f,
            },
            lipschitz,
            growth: None,
        }
    }

    pub fn with_growth_const(mut self, c: T) -> Self {
        self.growth = Some(c);
        self
    }

    pub fn eval(&self, theta: &[T], objective: &dyn Objective<T>) -> T {
        match &self.kind {
            TestKind::Norm => slice_norm(theta),
            TestKind::Coordinate(i) => theta[*i],
            TestKind::SigmoidOfF => sigmoid(objective.eval(theta)),
            TestKind::Custom { f, .. } => f(theta),
        }
    }

    /// `L_φ` with `|φ(θ)−φ(θ')| ≤ L_φ|θ−θ'|`; for the sigmoid-of-f kind
    /// this is the outer function's constant 1/4.
    pub fn lipschitz_const(&self) -> Option<T> {
        self.lipschitz
    }

    /// `c` with `|φ(θ)| ≤ c (1+|θ|)`, the weaker bound the distributional
    /// results need.
    pub fn growth_const(&self) -> Option<T> {
        self.growth
    }

    pub fn name(&self) -> String {
        match &self.kind {
            TestKind::Norm => "norm".to_string(),
            TestKind::Coordinate(i) => format!("coord{i}"),
            TestKind::SigmoidOfF => "sigmoid_of_f".to_string(),
            TestKind::Custom { name, .. } => name.clone(),
        }
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Central-difference gradient, the independent oracle backing every
/// analytic gradient in this crate: coordinate `i` is
/// `(f(θ+h e_i) − f(θ−h e_i)) / (2h)`.
pub fn finite_diff_grad<T: Scalar>(
    objective: &dyn Objective<T>,
    theta: &[T],
    h: T,
) -> Result<Vec<T>, CoreError> {
    assert!(h > T::zero(), "finite-difference step must be positive");
    let d = theta.len();
    let mut shifted = theta.to_vec();
    let mut out = vec![T::zero(); d];
    let two_h = T::of_f64(2.0) * h;
    for i in 0..d {
        let orig = shifted[i];
        shifted[i] = orig + h;
        let fp = objective.eval(&shifted);
        shifted[i] = orig - h;
        let fm = objective.eval(&shifted);
        shifted[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(CoreError::EvalFailure);
        }
        out[i] = (fp - fm) / two_h;
    }
    Ok(out)
}

/// The finite-difference step used by the gradient checks:
/// `h = 1e-5 (1 + |θ|)`, relative so large points do not lose precision.
pub fn default_fd_step<T: Scalar>(theta: &[T]) -> T {
    T::of_f64(1e-5) * (T::one() + slice_norm(theta))
}

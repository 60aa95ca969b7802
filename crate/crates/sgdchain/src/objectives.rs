//! Built-in objectives: two robust-regression losses on data, their
//! data-free simplifications with known minimizer, the 1-d quadratic-plus-
//! sine example, and a plain quadratic used as a trivial oracle in tests.

use std::path::PathBuf;
use std::sync::Arc;

use crate::error::ObjectiveError;
use crate::noise::RegressionDataset;
use crate::objective::{
    quad_form, LocalGrowthFn, Objective, RegularityConstants, SampledObjective,
};
use crate::point::{dot, slice_norm_sq, Point};
use crate::scalar::Scalar;

/// Regularized Cauchy-loss regression:
/// `f(θ) = (1/2m) Σ log(1+(y_i−⟨x_i,θ⟩)²) + (λ/2)|θ|²`.
pub struct CauchyRegMle<T: Scalar> {
    data: RegressionDataset<T>,
    lambda: T,
    l: T,
    beta: T,
}

impl<T: Scalar> CauchyRegMle<T> {
    pub fn new(data: RegressionDataset<T>, lambda: T) -> Result<Self, ObjectiveError> {
        if lambda <= T::zero() || !lambda.is_finite() {
            return Err(ObjectiveError::NonPositiveLambda(lambda.as_f64()));
        }
        if data.y().len() != data.m() {
            return Err(ObjectiveError::DimensionMismatch {
                m: data.m(),
                d: data.d(),
                ny: data.y().len(),
            });
        }
        let xty_norm = slice_norm_sq(&data.xty_over_m()).sqrt();
        let lam_max = T::of_f64(data.design_lambda_max());
        // |∇f(θ)| ≤ (λ_max((1/m)XᵀX)+λ)|θ| + |(1/m)Xᵀy|
        let l = (lam_max + lambda).max(xty_norm);
        let beta = xty_norm * xty_norm / lambda;
        Ok(Self {
            data,
            lambda,
            l,
            beta,
        })
    }

    pub fn dataset(&self) -> &RegressionDataset<T> {
        &self.data
    }

    /// `|(1/m) Xᵀ y|`, the quantity entering the declared `β`.
    pub fn xty_norm(&self) -> T {
        (self.beta * self.lambda).sqrt()
    }
}

impl<T: Scalar> Objective<T> for CauchyRegMle<T> {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn name(&self) -> &'static str {
        "cauchy-mle"
    }

    fn eval(&self, theta: &[T]) -> T {
        let m = self.data.m();
        let mut acc = T::zero();
        for i in 0..m {
            let r = self.data.y()[i] - dot(self.data.row(i), theta);
            acc += (T::one() + r * r).ln();
        }
        let half = T::of_f64(0.5);
        acc / (T::of_f64(2.0) * T::from_usize(m).unwrap())
            + half * self.lambda * slice_norm_sq(theta)
    }

    fn grad_into(&self, theta: &[T], out: &mut [T]) {
        let m = self.data.m();
        for (o, &t) in out.iter_mut().zip(theta) {
            *o = self.lambda * t;
        }
        let inv_m = T::from_usize(m).unwrap().recip();
        for i in 0..m {
            let row = self.data.row(i);
            let r = self.data.y()[i] - dot(row, theta);
            let w = -r / (T::one() + r * r) * inv_m;
            for (o, &xij) in out.iter_mut().zip(row) {
                *o += w * xij;
            }
        }
    }

    fn constants(&self) -> RegularityConstants<T> {
        RegularityConstants::new(self.l, self.lambda / T::of_f64(4.0), self.beta)
    }
}

impl<T: Scalar> SampledObjective<T> for CauchyRegMle<T> {
    fn n_samples(&self) -> usize {
        self.data.m()
    }

    fn per_sample_grad_into(&self, theta: &[T], j: usize, out: &mut [T]) {
        let row = self.data.row(j);
        let r = self.data.y()[j] - dot(row, theta);
        let w = -r / (T::one() + r * r);
        for ((o, &xij), &t) in out.iter_mut().zip(row).zip(theta) {
            *o = w * xij + self.lambda * t;
        }
    }
}

/// Data-free simplification of the Cauchy loss with known minimizer 0:
/// `f(θ) = ½ log(1+|θ|²) + (λ/2)|θ|²`.
pub struct SimplifiedCauchy<T: Scalar> {
    dim: usize,
    lambda: T,
}

impl<T: Scalar> SimplifiedCauchy<T> {
    pub fn new(dim: usize, lambda: T) -> Result<Self, ObjectiveError> {
        if dim == 0 {
            return Err(ObjectiveError::ZeroDim);
        }
        if lambda <= T::zero() || !lambda.is_finite() {
            return Err(ObjectiveError::NonPositiveLambda(lambda.as_f64()));
        }
        Ok(Self { dim, lambda })
    }

    /// Gradient-domination tail constant `γ = 2λ²/(1+λ)`.
    pub fn gamma(&self) -> T {
        let two = T::of_f64(2.0);
        two * self.lambda * self.lambda / (T::one() + self.lambda)
    }
}

impl<T: Scalar> Objective<T> for SimplifiedCauchy<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &'static str {
        "simplified-cauchy"
    }

    fn eval(&self, theta: &[T]) -> T {
        let t = slice_norm_sq(theta);
        let half = T::of_f64(0.5);
        half * (T::one() + t).ln() + half * self.lambda * t
    }

    fn grad_into(&self, theta: &[T], out: &mut [T]) {
        let t = slice_norm_sq(theta);
        let w = (T::one() + t).recip() + self.lambda;
        for (o, &th) in out.iter_mut().zip(theta) {
            *o = w * th;
        }
    }

    fn hessian(&self, theta: &[T]) -> Option<Vec<T>> {
        let d = self.dim;
        let t = slice_norm_sq(theta);
        let one_t = T::one() + t;
        let diag = one_t.recip() + self.lambda;
        let cross = -T::of_f64(2.0) / (one_t * one_t);
        let mut h = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                let mut v = cross * theta[i] * theta[j];
                if i == j {
                    v += diag;
                }
                h[i * d + j] = v;
            }
        }
        Some(h)
    }

    fn known_min(&self) -> Option<Point<T>> {
        Some(Point::zeros(self.dim))
    }

    fn constants(&self) -> RegularityConstants<T> {
        // |∇f| ≤ ½ + λ|θ| ≤ (λ+½)(1+|θ|);  ⟨θ,∇f⟩ ≥ λ|θ|²
        let mut c = RegularityConstants::new(
            self.lambda + T::of_f64(0.5),
            self.lambda,
            T::zero(),
        );
        c.l_tilde = Some(T::one() + self.lambda);
        c.gamma = Some(self.gamma());
        c.g_spec = Some(LocalGrowthFn::linear(self.gamma()).expect("gamma > 0"));
        c.r_local = Some(T::one());
        c
    }
}

/// Regularized Blake-Zisserman regression:
/// `f(θ) = −(1/2m) Σ log(ν+e^{−(y_i−⟨x_i,θ⟩)²}) + (λ/2)|θ|²`.
pub struct BlakeZissermanMle<T: Scalar> {
    data: RegressionDataset<T>,
    lambda: T,
    nu: T,
    l: T,
    beta: T,
}

impl<T: Scalar> BlakeZissermanMle<T> {
    pub fn new(data: RegressionDataset<T>, lambda: T, nu: T) -> Result<Self, ObjectiveError> {
        if lambda <= T::zero() || !lambda.is_finite() {
            return Err(ObjectiveError::NonPositiveLambda(lambda.as_f64()));
        }
        if nu <= T::zero() || !nu.is_finite() {
            return Err(ObjectiveError::NonPositiveNu(nu.as_f64()));
        }
        if data.y().len() != data.m() {
            return Err(ObjectiveError::DimensionMismatch {
                m: data.m(),
                d: data.d(),
                ny: data.y().len(),
            });
        }
        let xty_norm = slice_norm_sq(&data.xty_over_m()).sqrt();
        let lam_max = T::of_f64(data.design_lambda_max());
        let one_nu = T::one() + nu;
        // |∇f(θ)| ≤ (1/(1+ν))|(1/m)Xᵀy| + ((1/(1+ν))λ_max + λ)|θ|
        let l = (lam_max / one_nu + lambda).max(xty_norm / one_nu);
        let two = T::of_f64(2.0);
        let beta = xty_norm * xty_norm / (two * lambda * one_nu * one_nu);
        Ok(Self {
            data,
            lambda,
            nu,
            l,
            beta,
        })
    }
}

impl<T: Scalar> Objective<T> for BlakeZissermanMle<T> {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn name(&self) -> &'static str {
        "bz-mle"
    }

    fn eval(&self, theta: &[T]) -> T {
        let m = self.data.m();
        let mut acc = T::zero();
        for i in 0..m {
            let r = self.data.y()[i] - dot(self.data.row(i), theta);
            acc += (self.nu + (-r * r).exp()).ln();
        }
        let half = T::of_f64(0.5);
        -acc / (T::of_f64(2.0) * T::from_usize(m).unwrap())
            + half * self.lambda * slice_norm_sq(theta)
    }

    fn grad_into(&self, theta: &[T], out: &mut [T]) {
        let m = self.data.m();
        for (o, &t) in out.iter_mut().zip(theta) {
            *o = self.lambda * t;
        }
        let inv_m = T::from_usize(m).unwrap().recip();
        for i in 0..m {
            let row = self.data.row(i);
            let r = self.data.y()[i] - dot(row, theta);
            let e = (-r * r).exp();
            let w = -r * e / (self.nu + e) * inv_m;
            for (o, &xij) in out.iter_mut().zip(row) {
                *o += w * xij;
            }
        }
    }

    fn constants(&self) -> RegularityConstants<T> {
        RegularityConstants::new(self.l, self.lambda / T::of_f64(2.0), self.beta)
    }
}

impl<T: Scalar> SampledObjective<T> for BlakeZissermanMle<T> {
    fn n_samples(&self) -> usize {
        self.data.m()
    }

    fn per_sample_grad_into(&self, theta: &[T], j: usize, out: &mut [T]) {
        let row = self.data.row(j);
        let r = self.data.y()[j] - dot(row, theta);
        let e = (-r * r).exp();
        let w = -r * e / (self.nu + e);
        for ((o, &xij), &t) in out.iter_mut().zip(row).zip(theta) {
            *o = w * xij + self.lambda * t;
        }
    }
}

/// Data-free Blake-Zisserman simplification with known minimizer 0:
/// `f(θ) = −½ log(ν+e^{−|θ|²}) + (λ/2)|θ|²`.
pub struct SimplifiedBz<T: Scalar> {
    dim: usize,
    lambda: T,
    nu: T,
    r_local: T,
}

impl<T: Scalar> SimplifiedBz<T> {
    /// The localized-growth radius defaults to 2; the tail bound holds for
    /// any choice, the local growth coefficient depends on it.
    pub fn new(dim: usize, lambda: T, nu: T) -> Result<Self, ObjectiveError> {
        Self::with_radius(dim, lambda, nu, T::of_f64(2.0))
    }

    pub fn with_radius(
        dim: usize,
        lambda: T,
        nu: T,
        r_local: T,
    ) -> Result<Self, ObjectiveError> {
        if dim == 0 {
            return Err(ObjectiveError::ZeroDim);
        }
        if lambda <= T::zero() || !lambda.is_finite() {
            return Err(ObjectiveError::NonPositiveLambda(lambda.as_f64()));
        }
        if nu <= T::zero() || !nu.is_finite() {
            return Err(ObjectiveError::NonPositiveNu(nu.as_f64()));
        }
        Ok(Self {
            dim,
            lambda,
            nu,
            r_local,
        })
    }

    /// Local growth coefficient `λ + 1/(1+ν e^{R²})`.
    pub fn growth_coefficient(&self) -> T {
        self.lambda + (T::one() + self.nu * (self.r_local * self.r_local).exp()).recip()
    }
}

impl<T: Scalar> Objective<T> for SimplifiedBz<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &'static str {
        "simplified-bz"
    }

    fn eval(&self, theta: &[T]) -> T {
        let t = slice_norm_sq(theta);
        let half = T::of_f64(0.5);
        -half * (self.nu + (-t).exp()).ln() + half * self.lambda * t
    }

    fn grad_into(&self, theta: &[T], out: &mut [T]) {
        let t = slice_norm_sq(theta);
        // 1/(1+ν e^t) written overflow-free as e^{-t}/(e^{-t}+ν)
        let emt = (-t).exp();
        let w = emt / (emt + self.nu) + self.lambda;
        for (o, &th) in out.iter_mut().zip(theta) {
            *o = w * th;
        }
    }

    fn hessian(&self, theta: &[T]) -> Option<Vec<T>> {
        let d = self.dim;
        let t = slice_norm_sq(theta);
        let emt = (-t).exp();
        let diag = emt / (emt + self.nu) + self.lambda;
        // 2ν e^t/(1+ν e^t)² = 2ν e^{−t}/(ν+e^{−t})²
        let denom = self.nu + emt;
        let cross = -T::of_f64(2.0) * self.nu * emt / (denom * denom);
        let mut h = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                let mut v = cross * theta[i] * theta[j];
                if i == j {
                    v += diag;
                }
                h[i * d + j] = v;
            }
        }
        Some(h)
    }

    fn known_min(&self) -> Option<Point<T>> {
        Some(Point::zeros(self.dim))
    }

    fn constants(&self) -> RegularityConstants<T> {
        // |∇f| ≤ (λ + 1/(1+ν))|θ|;  ⟨θ,∇f⟩ ≥ λ|θ|² with β = 0
        let mut c = RegularityConstants::new(
            self.lambda + (T::one() + self.nu).recip(),
            self.lambda,
            T::zero(),
        );
        c.g_spec = Some(
            LocalGrowthFn::power(self.growth_coefficient(), T::of_f64(2.0))
                .expect("coefficient > 0"),
        );
        c.r_local = Some(self.r_local);
        // R = δ/α + sqrt(β/α) with β = 0 pins δ = αR
        c.delta = Some(self.lambda * self.r_local);
        c
    }
}

/// The 1-d example `f(x) = x² + 10 sin x`: non-convex, (1,25)-dissipative.
pub struct QuadSine<T> {
    known_min: T,
}

impl<T: Scalar> QuadSine<T> {
    pub fn new() -> Self {
        // global minimizer solves 2x + 10 cos x = 0; Newton from -1.3
        let mut x = -1.3f64;
        for _ in 0..64 {
            let g = 2.0 * x + 10.0 * x.cos();
            let h = 2.0 - 10.0 * x.sin();
            x -= g / h;
        }
        Self {
            known_min: T::of_f64(x),
        }
    }
}

impl<T: Scalar> Default for QuadSine<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Objective<T> for QuadSine<T> {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &'static str {
        "quadsine"
    }

    fn eval(&self, theta: &[T]) -> T {
        let x = theta[0];
        x * x + T::of_f64(10.0) * x.sin()
    }

    fn grad_into(&self, theta: &[T], out: &mut [T]) {
        let x = theta[0];
        out[0] = T::of_f64(2.0) * x + T::of_f64(10.0) * x.cos();
    }

    fn hessian(&self, theta: &[T]) -> Option<Vec<T>> {
        let x = theta[0];
        Some(vec![T::of_f64(2.0) - T::of_f64(10.0) * x.sin()])
    }

    fn known_min(&self) -> Option<Point<T>> {
        Point::new(vec![self.known_min]).ok()
    }

    fn constants(&self) -> RegularityConstants<T> {
        // |2x + 10 cos x| ≤ 10(1+|x|);  x f'(x) ≥ x² − 25
        let mut c =
            RegularityConstants::new(T::of_f64(10.0), T::one(), T::of_f64(25.0));
        c.l_tilde = Some(T::of_f64(12.0));
        c
    }
}

/// `f(θ) = ½|θ−θ*|²`, the trivial oracle.
pub struct Quadratic<T: Scalar> {
    center: Point<T>,
}

impl<T: Scalar> Quadratic<T> {
    pub fn new(center: Point<T>) -> Self {
        Self { center }
    }

    pub fn centered_at_zero(dim: usize) -> Self {
        Self {
            center: Point::zeros(dim),
        }
    }
}

impl<T: Scalar> Objective<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.center.dim()
    }

    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn eval(&self, theta: &[T]) -> T {
        let half = T::of_f64(0.5);
        half * theta
            .iter()
            .zip(self.center.as_slice())
            .map(|(&t, &c)| (t - c) * (t - c))
            .sum()
    }

    fn grad_into(&self, theta: &[T], out: &mut [T]) {
        for ((o, &t), &c) in out.iter_mut().zip(theta).zip(self.center.as_slice()) {
            *o = t - c;
        }
    }

    fn hessian(&self, _theta: &[T]) -> Option<Vec<T>> {
        let d = self.center.dim();
        let mut h = vec![T::zero(); d * d];
        for i in 0..d {
            h[i * d + i] = T::one();
        }
        Some(h)
    }

    fn known_min(&self) -> Option<Point<T>> {
        Some(self.center.clone())
    }

    fn constants(&self) -> RegularityConstants<T> {
        let cn = self.center.norm();
        let (l, alpha, beta) = if cn == T::zero() {
            (T::one(), T::one(), T::zero())
        } else {
            (
                T::one().max(cn),
                T::of_f64(0.5),
                T::of_f64(0.5) * cn * cn,
            )
        };
        let mut c = RegularityConstants::new(l, alpha, beta);
        c.l_tilde = Some(T::one());
        c.gamma = Some(T::of_f64(2.0));
        c.g_spec = Some(LocalGrowthFn::power(T::one(), T::of_f64(2.0)).expect("c > 0"));
        c
    }
}

/// Descriptor naming a built-in objective with its parameters; dataset-backed
/// objectives reference their CSV (the sidecar JSON is looked up next to it).
#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveSpec {
    CauchyRegMle { dataset: PathBuf, lambda: f64 },
    SimplifiedCauchy { dim: usize, lambda: f64 },
    BlakeZisserman { dataset: PathBuf, lambda: f64, nu: f64 },
    SimplifiedBz { dim: usize, lambda: f64, nu: f64, r_local: f64 },
    QuadSine,
    Quadratic { center: Vec<f64> },
}

impl ObjectiveSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveSpec::CauchyRegMle { .. } => "cauchy-mle",
            ObjectiveSpec::SimplifiedCauchy { .. } => "simplified-cauchy",
            ObjectiveSpec::BlakeZisserman { .. } => "bz-mle",
            ObjectiveSpec::SimplifiedBz { .. } => "simplified-bz",
            ObjectiveSpec::QuadSine => "quadsine",
            ObjectiveSpec::Quadratic { .. } => "quadratic",
        }
    }
}

/// An instantiated objective plus, where the objective is data-backed, the
/// per-sample view needed to build mini-batch noise.
pub struct BuiltObjective<T: Scalar> {
    pub objective: Arc<dyn Objective<T>>,
    pub sampled: Option<Arc<dyn SampledObjective<T>>>,
}

fn sidecar_path(csv: &std::path::Path) -> PathBuf {
    let mut name = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string());
    name.push_str(".meta.json");
    csv.with_file_name(name)
}

/// Build an objective from its descriptor, loading datasets as needed.
pub fn make_objective<T: Scalar>(
    spec: &ObjectiveSpec,
) -> Result<BuiltObjective<T>, ObjectiveError> {
    match spec {
        ObjectiveSpec::CauchyRegMle { dataset, lambda } => {
            let data = RegressionDataset::<T>::read(dataset, &sidecar_path(dataset))?;
            let obj = Arc::new(CauchyRegMle::new(data, T::of_f64(*lambda))?);
            Ok(BuiltObjective {
                objective: obj.clone(),
                sampled: Some(obj),
            })
        }
        ObjectiveSpec::SimplifiedCauchy { dim, lambda } => {
            let obj = Arc::new(SimplifiedCauchy::new(*dim, T::of_f64(*lambda))?);
            Ok(BuiltObjective {
                objective: obj,
                sampled: None,
            })
        }
        ObjectiveSpec::BlakeZisserman {
            dataset,
            lambda,
            nu,
        } => {
            let data = RegressionDataset::<T>::read(dataset, &sidecar_path(dataset))?;
            let obj = Arc::new(BlakeZissermanMle::new(
                data,
                T::of_f64(*lambda),
                T::of_f64(*nu),
            )?);
            Ok(BuiltObjective {
                objective: obj.clone(),
                sampled: Some(obj),
            })
        }
        ObjectiveSpec::SimplifiedBz {
            dim,
            lambda,
            nu,
            r_local,
        } => {
            let obj = Arc::new(SimplifiedBz::with_radius(
                *dim,
                T::of_f64(*lambda),
                T::of_f64(*nu),
                T::of_f64(*r_local),
            )?);
            Ok(BuiltObjective {
                objective: obj,
                sampled: None,
            })
        }
        ObjectiveSpec::QuadSine => Ok(BuiltObjective {
            objective: Arc::new(QuadSine::<T>::new()),
            sampled: None,
        }),
        ObjectiveSpec::Quadratic { center } => {
            let center = Point::new(center.iter().map(|&c| T::of_f64(c)).collect())?;
            Ok(BuiltObjective {
                objective: Arc::new(Quadratic::new(center)),
                sampled: None,
            })
        }
    }
}

/// A certified negative-curvature direction: a point `θ`, the unit radial
/// direction `u = θ/|θ|`, and the quadratic form `⟨u, ∇²f(θ) u⟩ < 0`.
#[derive(Clone, Debug)]
pub struct NegativityWitness<T> {
    pub theta: Point<T>,
    pub direction: Vec<T>,
    pub value: T,
}

/// Search `|θ| ∈ [0.5, 3]` in steps of 0.01 along the first axis for a
/// radial direction of negative curvature. Suits the built-in rotationally
/// symmetric objectives; convex objectives yield a not-found error.
pub fn hessian_negativity_witness<T: Scalar>(
    objective: &dyn Objective<T>,
) -> Result<NegativityWitness<T>, ObjectiveError> {
    let d = objective.dim();
    let mut best: Option<(T, T)> = None;
    let mut r = 0.5f64;
    while r <= 3.0 + 1e-12 {
        let rt = T::of_f64(r);
        let mut theta = vec![T::zero(); d];
        theta[0] = rt;
        if let Some(h) = objective.hessian(&theta) {
            let mut u = vec![T::zero(); d];
            u[0] = T::one();
            let v = quad_form(&h, &u);
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((rt, v));
            }
        }
        r += 0.01;
    }
    match best {
        Some((rt, v)) if v < T::zero() => {
            let mut theta = vec![T::zero(); d];
            theta[0] = rt;
            let mut u = vec![T::zero(); d];
            u[0] = T::one();
            Ok(NegativityWitness {
                theta: Point::new(theta)?,
                direction: u,
                value: v,
            })
        }
        _ => Err(ObjectiveError::NoNegativityWitness),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{gen_regression_data, RngStream};
    use crate::objective::{default_fd_step, finite_diff_grad};
    use crate::point::slice_norm;

    fn random_ball_point(rng: &mut impl rand::Rng, d: usize, radius: f64) -> Vec<f64> {
        // uniform in the ball: normal direction times radius * u^{1/d}
        let mut v: Vec<f64> = (0..d).map(|_| f64::standard_normal(rng)).collect();
        let n = slice_norm(&v);
        let u: f64 = f64::unit_uniform(rng);
        let r = radius * u.powf(1.0 / d as f64);
        for c in v.iter_mut() {
            *c *= r / n;
        }
        v
    }

    fn check_fd(objective: &dyn Objective<f64>, n_points: usize, seed: u64) {
        let mut rng = RngStream::new(seed, 0).rng();
        let d = objective.dim();
        for _ in 0..n_points {
            let theta = random_ball_point(&mut rng, d, 5.0);
            let h = default_fd_step(&theta);
            let fd = finite_diff_grad(objective, &theta, h).unwrap();
            let an = objective.grad(&theta);
            let diff: f64 = fd
                .iter()
                .zip(&an)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let rel = diff / (1.0 + slice_norm(&an));
            assert!(rel <= 1e-5, "fd mismatch {rel} at {theta:?}");
        }
    }

    #[test]
    fn all_builtin_gradients_match_finite_differences() {
        let ds = gen_regression_data::<f64>(200, 5, 10.0, &RngStream::new(42, 0));
        check_fd(&CauchyRegMle::new(ds.clone(), 0.1).unwrap(), 100, 1);
        check_fd(&BlakeZissermanMle::new(ds, 0.1, 1.0).unwrap(), 100, 2);
        check_fd(&SimplifiedCauchy::new(3, 0.1).unwrap(), 100, 3);
        check_fd(&SimplifiedBz::new(3, 0.1, 1.0).unwrap(), 100, 4);
        check_fd(&QuadSine::new(), 100, 5);
        check_fd(
            &Quadratic::new(Point::new(vec![1.0, -2.0]).unwrap()),
            100,
            6,
        );
    }

    #[test]
    fn simplified_cauchy_grad_hand_values() {
        let obj = SimplifiedCauchy::new(2, 0.1).unwrap();
        // critical point at the origin
        let g0 = obj.grad(&[0.0, 0.0]);
        assert_eq!(g0, vec![0.0, 0.0]);
        // theta = (1, 0): first coordinate 1/(1+1) + 0.1 = 0.6
        let obj5 = SimplifiedCauchy::new(5, 0.1f64).unwrap();
        let mut theta = vec![0.0; 5];
        theta[0] = 1.0;
        let fd = finite_diff_grad(&obj5, &theta, 1e-5).unwrap();
        assert!((fd[0] - 0.6).abs() < 1e-6, "got {}", fd[0]);
        for &c in &fd[1..] {
            assert!(c.abs() < 1e-6);
        }
    }

    #[test]
    fn simplified_bz_grad_hand_value() {
        // |θ| = 1, ν = 1, λ = 0.1: ∇f = (1/(1+e) + 0.1) θ ≈ 0.368941 θ
        let obj = SimplifiedBz::new(3, 0.1, 1.0).unwrap();
        let theta = [1.0 / 3f64.sqrt(); 3];
        let g = obj.grad(&theta);
        let w = 1.0 / (1.0 + std::f64::consts::E) + 0.1;
        assert!((w - 0.368941).abs() < 1e-5);
        for (gi, ti) in g.iter().zip(&theta) {
            assert!((gi - w * ti).abs() < 1e-12, "{gi} vs {}", w * ti);
        }
    }

    #[test]
    fn quadsine_constants_and_min() {
        let obj = QuadSine::<f64>::new();
        let c = obj.constants();
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.beta, 25.0);
        let min = obj.known_min().unwrap();
        let g = obj.grad(min.as_slice());
        assert!(g[0].abs() <= 1e-8, "|grad| at known min = {}", g[0]);
        // dissipativity x f'(x) >= x^2 - 25 on a grid
        let mut x = -50.0f64;
        while x <= 50.0 {
            let xf = x * (2.0 * x + 10.0 * x.cos());
            assert!(xf >= x * x - 25.0 - 1e-9, "violated at {x}");
            x += 0.01;
        }
    }

    #[test]
    fn cauchy_gradient_growth_bound() {
        let ds = gen_regression_data::<f64>(300, 8, 10.0, &RngStream::new(7, 0));
        let obj = CauchyRegMle::new(ds.clone(), 0.1).unwrap();
        let lam_max = ds.design_lambda_max();
        let xty = slice_norm(&ds.xty_over_m());
        let mut rng = RngStream::new(8, 0).rng();
        for _ in 0..1000 {
            let theta = random_ball_point(&mut rng, 8, 10.0);
            let g = slice_norm(&obj.grad(&theta));
            let bound = (lam_max + 0.1) * slice_norm(&theta) + xty;
            assert!(g <= bound + 1e-9, "{g} > {bound}");
        }
    }

    #[test]
    fn simplified_cauchy_gradient_domination() {
        let obj = SimplifiedCauchy::new(4, 0.1f64).unwrap();
        let gamma = obj.gamma();
        assert!((gamma - 2.0 * 0.01 / 1.1).abs() < 1e-15);
        let f0 = obj.eval(&[0.0; 4]);
        let mut rng = RngStream::new(9, 0).rng();
        for _ in 0..1000 {
            let theta = random_ball_point(&mut rng, 4, 10.0);
            let g2 = slice_norm_sq(&obj.grad(&theta));
            let gap = obj.eval(&theta) - f0;
            assert!(g2 >= gamma * gap - 1e-12, "{g2} < {}", gamma * gap);
        }
    }

    #[test]
    fn simplified_bz_dissipativity() {
        let obj = SimplifiedBz::new(4, 0.1, 1.0).unwrap();
        let mut rng = RngStream::new(10, 0).rng();
        for _ in 0..1000 {
            let theta = random_ball_point(&mut rng, 4, 10.0);
            let g = obj.grad(&theta);
            let inner = dot(&g, &theta);
            let t = slice_norm_sq(&theta);
            assert!(inner >= 0.1 * t - 1e-12, "{inner} < {}", 0.1 * t);
        }
    }

    #[test]
    fn negativity_witness_bands() {
        let sc = SimplifiedCauchy::new(3, 0.1).unwrap();
        let w = hessian_negativity_witness(&sc).unwrap();
        assert!(w.value < 0.0);
        let r = w.theta.norm();
        assert!((1.5..=2.0).contains(&r) || w.value < 0.0, "radius {r}");
        // the most negative radial curvature lands inside the stated band
        assert!((1.5..=2.0).contains(&r), "radius {r} outside [1.5, 2]");

        let bz = SimplifiedBz::new(3, 0.1, 1.0).unwrap();
        let w = hessian_negativity_witness(&bz).unwrap();
        assert!(w.value < 0.0);
        let t = w.theta.norm_sq();
        assert!((1.0..=2.0).contains(&t), "|theta|^2 = {t} outside [1, 2]");

        let q = Quadratic::<f64>::centered_at_zero(3);
        assert!(matches!(
            hessian_negativity_witness(&q),
            Err(ObjectiveError::NoNegativityWitness)
        ));
    }

    #[test]
    fn make_objective_validates() {
        assert!(make_objective::<f64>(&ObjectiveSpec::SimplifiedCauchy {
            dim: 2,
            lambda: -1.0
        })
        .is_err());
        assert!(make_objective::<f64>(&ObjectiveSpec::SimplifiedBz {
            dim: 2,
            lambda: 0.1,
            nu: 0.0,
            r_local: 2.0
        })
        .is_err());
        let built = make_objective::<f64>(&ObjectiveSpec::QuadSine).unwrap();
        let c = built.objective.constants();
        assert_eq!((c.alpha, c.beta), (1.0, 25.0));
    }

    #[test]
    fn minibatch_full_batch_is_centered() {
        use crate::noise::NoiseModel;
        let ds = gen_regression_data::<f64>(40, 3, 10.0, &RngStream::new(21, 0));
        let obj = Arc::new(CauchyRegMle::new(ds, 0.1).unwrap());
        let model = NoiseModel::minibatch(obj.clone(), obj.n_samples()).unwrap();
        let mut rng = RngStream::new(22, 0).rng();
        let theta = Point::new(vec![0.3, -0.2, 0.9]).unwrap();
        let draw = model.draw(&theta, &mut rng).unwrap();
        assert!(draw.norm() < 1e-12, "full batch must center to zero");
    }

    #[test]
    fn minibatch_mean_zero_over_resampling() {
        use crate::noise::NoiseModel;
        let ds = gen_regression_data::<f64>(60, 3, 10.0, &RngStream::new(23, 0));
        let obj = Arc::new(CauchyRegMle::new(ds, 0.1).unwrap());
        let model = NoiseModel::minibatch(obj.clone(), 2).unwrap();
        let mut rng = RngStream::new(24, 0).rng();
        // five test points, per-coordinate |mean| within 5 standard errors
        let test_points = [
            vec![0.5, 0.5, 0.5],
            vec![0.0, 0.0, 0.0],
            vec![-1.0, 2.0, 0.3],
            vec![3.0, -3.0, 1.0],
            vec![0.1, -0.2, -4.0],
        ];
        let n = 10_000usize;
        for theta in test_points {
            let theta = Point::new(theta).unwrap();
            let mut acc = vec![0.0f64; 3];
            let mut sq = vec![0.0f64; 3];
            let mut buf = vec![0.0f64; 3];
            for _ in 0..n {
                model.draw_into(&theta, &mut buf, &mut rng).unwrap();
                for i in 0..3 {
                    acc[i] += buf[i];
                    sq[i] += buf[i] * buf[i];
                }
            }
            for i in 0..3 {
                let mean = acc[i] / n as f64;
                let var = sq[i] / n as f64 - mean * mean;
                let se = (var / n as f64).sqrt().max(1e-12);
                assert!(
                    mean.abs() <= 5.0 * se,
                    "coord {i} at {theta:?}: mean {mean}, se {se}"
                );
            }
        }
    }
}

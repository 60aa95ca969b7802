//! Closed-form constants (admissible step sizes, moment bounds, bias
//! constants) and sampling-based certificates for the growth, dissipativity,
//! and gradient-domination conditions.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::TheoryError;
use crate::noise::RngStream;
use crate::objective::{LocalGrowthFn, Objective};
use crate::point::{dot, slice_norm, slice_norm_sq};
use crate::scalar::Scalar;

/// Ergodicity step-size cap
/// `[α − sqrt((α² − (3L²+L_ξ)) ∨ 0)] / (3L² + L_ξ)`.
pub fn max_step_size<T: Scalar>(l: T, alpha: T, l_xi: T) -> T {
    let three = T::of_f64(3.0);
    let denom = three * l * l + l_xi;
    let inner = (alpha * alpha - denom).max(T::zero());
    (alpha - inner.sqrt()) / denom
}

/// `L̄ = L (1 + |θ*|)`.
pub fn l_bar<T: Scalar>(l: T, theta_star_norm: T) -> T {
    l * (T::one() + theta_star_norm)
}

/// `L† = L̄² + 16 ( L_ξ^{3/4}(1+(β/α)³) ∨ L_ξ^{1/2}(1+(β/α)²) ∨ L_ξ(1+(β/α)⁴) )`.
pub fn l_dagger<T: Scalar>(l_bar: T, l_xi: T, beta_over_alpha: T) -> T {
    let one = T::one();
    let q = beta_over_alpha;
    let a = l_xi.powf(T::of_f64(0.75)) * (one + q.powi(3));
    let b = l_xi.sqrt() * (one + q.powi(2));
    let c = l_xi * (one + q.powi(4));
    l_bar * l_bar + T::of_f64(16.0) * a.max(b).max(c)
}

/// Fourth-moment step-size cap
/// `c† = [α − sqrt((α² − 16 L†) ∨ 0)] / (64 L†)`.
pub fn c_dagger<T: Scalar>(l_bar: T, alpha: T, l_xi: T, beta_over_alpha: T) -> T {
    let ld = l_dagger(l_bar, l_xi, beta_over_alpha);
    let inner = (alpha * alpha - T::of_f64(16.0) * ld).max(T::zero());
    (alpha - inner.sqrt()) / (T::of_f64(64.0) * ld)
}

/// All step-size caps for one constant set, together with their minimum
/// `1 ∧ 1/(10 L̄) ∧ c_{L,α} ∧ c†`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepSizeBounds<T> {
    pub c_l_alpha: T,
    pub c_dagger: T,
    pub l_bar: T,
    pub l_dagger: T,
    pub overall_max: T,
}

pub fn step_size_bounds<T: Scalar>(
    l: T,
    alpha: T,
    beta: T,
    l_xi: T,
    theta_star_norm: T,
) -> StepSizeBounds<T> {
    let lb = l_bar(l, theta_star_norm);
    let q = beta / alpha;
    let ld = l_dagger(lb, l_xi, q);
    let c = max_step_size(l, alpha, l_xi);
    let cd = c_dagger(lb, alpha, l_xi, q);
    let overall = T::one()
        .min((T::of_f64(10.0) * lb).recip())
        .min(c)
        .min(cd);
    StepSizeBounds {
        c_l_alpha: c,
        c_dagger: cd,
        l_bar: lb,
        l_dagger: ld,
        overall_max: overall,
    }
}

/// Non-asymptotic contraction pair from the critical-point ball bound:
/// `E^{1/2}|θ_k − θ*|⁴ ≤ ρ^k |θ_0 − θ*|² + D`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BiasDecay<T> {
    pub d_const: T,
    pub rho: T,
}

/// Compute `(D, ρ)` for a step size inside the cap
/// `1 ∧ 1/(10 L̄) ∧ c_{L,α} ∧ c†`; errors name the binding cap otherwise.
///
/// `D` is the max of its two displayed branches:
/// `(64/α) (L̄⁴ + L_ξ(1+(β/α)⁴) + 512 L̄⁶ + 23 L_ξ^{3/2}(1+(β/α)⁶))^{1/2}`
/// and
/// `(8/α) (β + (√α + 2L/√α)² |θ*| + L |θ*| + 6 L̄² + 9 L_ξ^{1/2}(1+(β/α)²) + 16)`;
/// `ρ = sqrt(1 − 2αη + 32 L† η²)`.
pub fn bias_decay_constants<T: Scalar>(
    l: T,
    alpha: T,
    beta: T,
    l_xi: T,
    theta_star_norm: T,
    eta: T,
) -> Result<BiasDecay<T>, TheoryError> {
    let bounds = step_size_bounds(l, alpha, beta, l_xi, theta_star_norm);
    if eta >= bounds.overall_max {
        let (cap, cap_name) = [
            (T::one(), "1"),
            ((T::of_f64(10.0) * bounds.l_bar).recip(), "1/(10 L_bar)"),
            (bounds.c_l_alpha, "c_{L,alpha}"),
            (bounds.c_dagger, "c_dagger"),
        ]
        .into_iter()
        .fold(None::<(T, &'static str)>, |acc, (v, n)| match acc {
            Some((bv, _)) if bv <= v => acc,
            _ => Some((v, n)),
        })
        .unwrap();
        return Err(TheoryError::StepSizeAboveCap {
            eta: eta.as_f64(),
            cap: cap.as_f64(),
            cap_name,
        });
    }

    let one = T::one();
    let q = beta / alpha;
    let lb = bounds.l_bar;
    let first = T::of_f64(64.0) / alpha
        * (lb.powi(4)
            + l_xi * (one + q.powi(4))
            + T::of_f64(512.0) * lb.powi(6)
            + T::of_f64(23.0) * l_xi.powf(T::of_f64(1.5)) * (one + q.powi(6)))
        .sqrt();
    let sqrt_alpha = alpha.sqrt();
    let second = T::of_f64(8.0) / alpha
        * (beta
            + (sqrt_alpha + T::of_f64(2.0) * l / sqrt_alpha).powi(2) * theta_star_norm
            + l * theta_star_norm
            + T::of_f64(6.0) * lb * lb
            + T::of_f64(9.0) * l_xi.sqrt() * (one + q.powi(2))
            + T::of_f64(16.0));
    let d_const = first.max(second);

    let rho_sq = one - T::of_f64(2.0) * alpha * eta
        + T::of_f64(32.0) * bounds.l_dagger * eta * eta;
    let rho = rho_sq.sqrt();
    assert!(
        rho > T::zero() && rho < one,
        "rho = {rho} must lie in (0,1) for eta inside the cap"
    );
    Ok(BiasDecay { d_const, rho })
}

/// Stationary second-moment bound `μ₂ ≤ 3 + 2β/α`.
pub fn mu2_bound<T: Scalar>(alpha: T, beta: T) -> T {
    T::of_f64(3.0) + T::of_f64(2.0) * beta / alpha
}

/// Stationary fourth-moment bound
/// `μ₄ = (8/(7α)) [ (β + 6L² + 3L_ξ^{1/2} + 16) μ₂ + 16L⁴ + 2L_ξ + 128L⁶ + 8L_ξ^{3/2} ]`.
pub fn mu4_bound<T: Scalar>(l: T, alpha: T, beta: T, l_xi: T) -> T {
    let mu2 = mu2_bound(alpha, beta);
    mu4_bound_with_mu2(l, alpha, beta, l_xi, mu2)
}

fn mu4_bound_with_mu2<T: Scalar>(l: T, alpha: T, beta: T, l_xi: T, mu2: T) -> T {
    let lin = (beta
        + T::of_f64(6.0) * l * l
        + T::of_f64(3.0) * l_xi.sqrt()
        + T::of_f64(16.0))
        * mu2;
    let cst = T::of_f64(16.0) * l.powi(4)
        + T::of_f64(2.0) * l_xi
        + T::of_f64(128.0) * l.powi(6)
        + T::of_f64(8.0) * l_xi.powf(T::of_f64(1.5));
    T::of_f64(8.0) / (T::of_f64(7.0) * alpha) * (lin + cst)
}

/// Bias constant of the localized-dissipativity bound:
/// `C = 2(3L² + 3L_ξ^{1/2}(1+(β/α)²))(μ₂ + |θ*|²) + 3L²|θ*|² + 5L²
///      + 2L_ξ^{1/2}(1+(β/α)²)`.
///
/// `mu2` may be either the empirical second moment or the closed-form bound.
pub fn stationary_bias_constant<T: Scalar>(
    l: T,
    l_xi: T,
    alpha: T,
    beta: T,
    mu2: T,
    theta_star_norm: T,
) -> T {
    let one = T::one();
    let q = beta / alpha;
    let noise = l_xi.sqrt() * (one + q * q);
    let l2 = l * l;
    let ts2 = theta_star_norm * theta_star_norm;
    T::of_f64(2.0) * (T::of_f64(3.0) * l2 + T::of_f64(3.0) * noise) * (mu2 + ts2)
        + T::of_f64(3.0) * l2 * ts2
        + T::of_f64(5.0) * l2
        + T::of_f64(2.0) * noise
}

/// `L_φ (Cη/δ + g⁻¹(Cη))`, the localized-dissipativity bias bound.
pub fn stationary_bias_bound<T: Scalar>(
    c: T,
    eta: T,
    delta: T,
    g: &LocalGrowthFn<T>,
    l_phi: T,
) -> T {
    l_phi * (c * eta / delta + g.inverse(c * eta))
}

/// Output of the gradient-domination bias bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradDominationBias<T> {
    /// fourth-moment surrogate `m` entering `M`
    pub m_small: T,
    /// the constant `M`
    pub m_big: T,
    /// `2Mη / (2 − L̃η)`
    pub drift: T,
    /// `g⁻¹(drift) + drift`, the suboptimality bound on `π_η(f) − f*`
    pub bias_bound: T,
}

/// Constants of the gradient-domination bias bound:
/// `m = (8/(7α))[(β + 6L² + 3L_ξ^{1/2} + 16) μ₂ + 16L⁴ + 2L_ξ + 128L⁶ + 8L_ξ^{3/2}]`,
/// `M = 12 L̃ (L + L_ξ^{1/2} + L_ξ^{1/4})² (1 + m + m^{3/4} + μ₂)`,
/// bound `g⁻¹(2Mη/(2−L̃η)) + 2Mη/(2−L̃η)`.
///
/// Errors at the pole `η ≥ 2/L̃`; the remaining admissibility caps live in
/// [`step_size_bounds`].
#[allow(clippy::too_many_arguments)]
pub fn grad_domination_bias<T: Scalar>(
    l: T,
    l_tilde: T,
    l_xi: T,
    alpha: T,
    beta: T,
    mu2: T,
    eta: T,
    g: &LocalGrowthFn<T>,
) -> Result<GradDominationBias<T>, TheoryError> {
    let two = T::of_f64(2.0);
    let pole = two / l_tilde;
    if eta >= pole {
        return Err(TheoryError::StepSizePole {
            eta: eta.as_f64(),
            pole: pole.as_f64(),
        });
    }
    let m_small = mu4_bound_with_mu2(l, alpha, beta, l_xi, mu2);
    let m_big = T::of_f64(12.0)
        * l_tilde
        * (l + l_xi.sqrt() + l_xi.powf(T::of_f64(0.25))).powi(2)
        * (T::one() + m_small + m_small.powf(T::of_f64(0.75)) + mu2);
    let drift = two * m_big * eta / (two - l_tilde * eta);
    let bias_bound = g.inverse(drift) + drift;
    Ok(GradDominationBias {
        m_small,
        m_big,
        drift,
        bias_bound,
    })
}

// ---------------------------------------------------------------------------
// Sampling-based assumption certificates
// ---------------------------------------------------------------------------

/// One inequality violation found while sampling.
#[derive(Clone, Debug, Serialize)]
pub struct ViolationRecord {
    pub theta: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// JSON-ready certificate for one assumption check. `violations` keeps at
/// most [`MAX_STORED_VIOLATIONS`] samples; the total count is in `params`.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub assumption: String,
    pub params: serde_json::Value,
    pub n_samples: usize,
    pub violations: Vec<ViolationRecord>,
    pub certified: bool,
}

pub const MAX_STORED_VIOLATIONS: usize = 100;

/// Uniform point in the ball of the given radius.
pub(crate) fn sample_ball_point<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    radius: T,
) -> Vec<T> {
    let mut v: Vec<T> = (0..d).map(|_| T::standard_normal(rng)).collect();
    let n = slice_norm(&v);
    let u = T::unit_uniform(rng);
    let r = radius * u.powf(T::from_usize(d).unwrap().recip());
    let scale = if n > T::zero() { r / n } else { T::zero() };
    for c in v.iter_mut() {
        *c *= scale;
    }
    v
}

/// Random direction at a log-uniform radius in `[r_lo, r_hi]`; dissipativity
/// is a tail condition, so the checkers spread samples across shells.
pub(crate) fn sample_shell_point<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    r_lo: T,
    r_hi: T,
) -> Vec<T> {
    let mut v: Vec<T> = (0..d).map(|_| T::standard_normal(rng)).collect();
    let n = slice_norm(&v);
    let u = T::unit_uniform(rng);
    let r = r_lo * (r_hi / r_lo).powf(u);
    let scale = if n > T::zero() { r / n } else { T::zero() };
    for c in v.iter_mut() {
        *c *= scale;
    }
    v
}

fn draw_check_points<T: Scalar>(
    d: usize,
    radius: T,
    n_samples: usize,
    stream: &RngStream,
) -> Vec<Vec<T>> {
    let mut rng = stream.rng();
    let mut pts = Vec::with_capacity(n_samples);
    let half = n_samples / 2;
    for _ in 0..half {
        pts.push(sample_ball_point(&mut rng, d, radius));
    }
    for _ in half..n_samples {
        pts.push(sample_shell_point(&mut rng, d, radius, T::of_f64(10.0) * radius));
    }
    pts
}

/// Result of the gradient-growth check.
#[derive(Clone, Debug)]
pub struct LinearGrowthCheck<T> {
    /// empirical lower certificate `max |∇f(θ)| / (1+|θ|)`
    pub l_hat: T,
    pub certificate: Certificate,
}

/// Estimate the growth constant by maximizing `|∇f(θ)|/(1+|θ|)` over a ball
/// of the given radius plus log-spaced shells out to ten times it.
pub fn check_linear_growth<T: Scalar>(
    objective: &dyn Objective<T>,
    radius: T,
    n_samples: usize,
    stream: &RngStream,
) -> Result<LinearGrowthCheck<T>, TheoryError> {
    assert!(radius > T::zero() && n_samples >= 1);
    let points = draw_check_points(objective.dim(), radius, n_samples, stream);
    let ratios: Vec<T> = points
        .par_iter()
        .map(|theta| {
            let g = slice_norm(&objective.grad(theta));
            g / (T::one() + slice_norm(theta))
        })
        .collect();
    let declared = objective.constants().l;
    let mut l_hat = T::zero();
    let mut violations = Vec::new();
    let mut n_violations = 0usize;
    for (theta, &ratio) in points.iter().zip(&ratios) {
        if !ratio.is_finite() {
            return Err(TheoryError::Core(crate::error::CoreError::EvalFailure));
        }
        l_hat = l_hat.max(ratio);
        if ratio > declared * T::of_f64(1.0 + 1e-9) {
            n_violations += 1;
            if violations.len() < MAX_STORED_VIOLATIONS {
                violations.push(ViolationRecord {
                    theta: theta.iter().map(|c| c.as_f64()).collect(),
                    lhs: ratio.as_f64(),
                    rhs: declared.as_f64(),
                });
            }
        }
    }
    let certified = n_violations == 0;
    let certificate = Certificate {
        assumption: "linear_growth".to_string(),
        params: serde_json::json!({
            "radius": radius.as_f64(),
            "declared_l": declared.as_f64(),
            "l_hat": l_hat.as_f64(),
            "n_violations": n_violations,
        }),
        n_samples,
        violations,
        certified,
    };
    Ok(LinearGrowthCheck { l_hat, certificate })
}

/// Result of the dissipativity check.
#[derive(Clone, Debug)]
pub struct DissipativityCheck<T> {
    pub alpha_hat: T,
    /// `max over samples of (α̂|θ|² − ⟨θ,∇f(θ)⟩)₊`
    pub beta_hat: T,
    pub certificate: Certificate,
}

/// Certify `⟨θ,∇f(θ)⟩ ≥ α|θ|² − β`. The declared (or caller-supplied) `α`
/// is tried first, then a log grid; a candidate is accepted only when the
/// worst slack is attained away from the outer sampling shell, i.e. the
/// deficit does not keep growing in the tail.
pub fn check_dissipativity<T: Scalar>(
    objective: &dyn Objective<T>,
    radius: T,
    n_samples: usize,
    stream: &RngStream,
    candidate_alpha: Option<T>,
) -> Result<DissipativityCheck<T>, TheoryError> {
    assert!(radius > T::zero() && n_samples >= 1);
    let points = draw_check_points(objective.dim(), radius, n_samples, stream);
    // (|θ|², ⟨θ,∇f(θ)⟩) per sample
    let pairs: Vec<(T, T)> = points
        .par_iter()
        .map(|theta| {
            let g = objective.grad(theta);
            (slice_norm_sq(theta), dot(theta, &g))
        })
        .collect();

    let declared_alpha = candidate_alpha.unwrap_or(objective.constants().alpha);
    let declared_beta = objective.constants().beta;
    let mut candidates = vec![declared_alpha];
    let mut a = 100.0f64;
    while a >= 1e-4 - 1e-12 {
        candidates.push(T::of_f64(a));
        a /= 10.0f64.sqrt();
    }

    // slack must peak strictly inside the sampled range for the tail
    // condition to be visible
    let tail_start = T::of_f64(8.0) * radius;
    let tail_start_sq = tail_start * tail_start;

    let mut worst_norm = T::zero();
    for (alpha_hat, first) in candidates.iter().map(|&c| (c, false)).enumerate().map(|(i, (c, _))| (c, i == 0)) {
        if alpha_hat <= T::zero() {
            continue;
        }
        let mut beta_interior = T::zero();
        let mut beta_tail = T::zero();
        let mut worst: Option<(usize, T)> = None;
        for (i, &(nsq, inner)) in pairs.iter().enumerate() {
            let slack = (alpha_hat * nsq - inner).max(T::zero());
            if nsq >= tail_start_sq {
                beta_tail = beta_tail.max(slack);
            } else {
                beta_interior = beta_interior.max(slack);
            }
            if worst.map_or(true, |(_, w)| slack > w) {
                worst = Some((i, slack));
            }
        }
        let tail_ok = beta_tail <= beta_interior;
        if !tail_ok {
            if let Some((i, _)) = worst {
                worst_norm = worst_norm.max(pairs[i].0.sqrt());
            }
            continue;
        }
        let beta_hat = beta_interior.max(beta_tail);
        // against the declared pair, only the declared alpha is comparable
        let beta_ok = if first {
            beta_hat <= declared_beta * T::of_f64(1.0 + 1e-9) + T::of_f64(1e-12)
        } else {
            true
        };
        let mut violations = Vec::new();
        if !beta_ok {
            if let Some((i, slack)) = worst {
                violations.push(ViolationRecord {
                    theta: points[i].iter().map(|c| c.as_f64()).collect(),
                    lhs: slack.as_f64(),
                    rhs: declared_beta.as_f64(),
                });
            }
        }
        let certificate = Certificate {
            assumption: "dissipativity".to_string(),
            params: serde_json::json!({
                "radius": radius.as_f64(),
                "alpha": alpha_hat.as_f64(),
                "beta_hat": beta_hat.as_f64(),
                "declared_beta": declared_beta.as_f64(),
                "n_violations": violations.len(),
            }),
            n_samples,
            violations,
            certified: beta_ok,
        };
        return Ok(DissipativityCheck {
            alpha_hat,
            beta_hat,
            certificate,
        });
    }
    Err(TheoryError::NotCertifiable {
        worst_norm: worst_norm.as_f64(),
    })
}

/// Which local growth condition to certify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthCheckKind {
    /// `⟨∇f(θ), θ−θ*⟩ ≥ g(|θ−θ*|)` inside radius `R`, `≥ α|θ−θ*|²−β` outside
    LocalizedDissipativity,
    /// `|∇f(θ)|² ≥ g(f(θ)−f*)` inside radius `R`, `≥ γ(f(θ)−f*)` outside
    Lojasiewicz,
}

/// Certify a local growth condition around the known minimizer.
pub fn check_local_growth<T: Scalar>(
    objective: &dyn Objective<T>,
    kind: GrowthCheckKind,
    g: &LocalGrowthFn<T>,
    big_r: T,
    n_samples: usize,
    stream: &RngStream,
) -> Result<Certificate, TheoryError> {
    assert!(big_r > T::zero() && n_samples >= 1);
    let theta_star = objective
        .known_min()
        .ok_or(TheoryError::MissingKnownMin)?;
    let d = objective.dim();
    let f_star = objective.eval(&theta_star);
    let constants = objective.constants();
    let gamma = constants.gamma;
    if kind == GrowthCheckKind::Lojasiewicz && gamma.is_none() {
        return Err(TheoryError::BadConstant(
            "objective declares no gamma for the tail condition".into(),
        ));
    }

    let mut rng = stream.rng();
    let mut points = Vec::with_capacity(n_samples);
    let half = n_samples / 2;
    for i in 0..n_samples {
        let mut offset = if i < half {
            sample_ball_point(&mut rng, d, big_r)
        } else {
            sample_shell_point(&mut rng, d, big_r, T::of_f64(10.0) * big_r)
        };
        for (o, &c) in offset.iter_mut().zip(theta_star.as_slice()) {
            *o += c;
        }
        points.push(offset);
    }

    let evals: Vec<(T, T, T)> = points
        .par_iter()
        .map(|theta| {
            let grad = objective.grad(theta);
            let diff: Vec<T> = theta
                .iter()
                .zip(theta_star.as_slice())
                .map(|(&a, &b)| a - b)
                .collect();
            let dist = slice_norm(&diff);
            let lhs = match kind {
                GrowthCheckKind::LocalizedDissipativity => dot(&grad, &diff),
                GrowthCheckKind::Lojasiewicz => slice_norm_sq(&grad),
            };
            let rhs = match kind {
                GrowthCheckKind::LocalizedDissipativity => {
                    if dist < big_r {
                        g.eval(dist)
                    } else {
                        constants.alpha * dist * dist - constants.beta
                    }
                }
                GrowthCheckKind::Lojasiewicz => {
                    let gap = objective.eval(theta) - f_star;
                    if dist < big_r {
                        g.eval(gap)
                    } else {
                        gamma.unwrap() * gap
                    }
                }
            };
            (lhs, rhs, dist)
        })
        .collect();

    let mut violations = Vec::new();
    let mut n_violations = 0usize;
    for (theta, &(lhs, rhs, _)) in points.iter().zip(&evals) {
        let eps = T::of_f64(1e-9) * (T::one() + rhs.abs());
        if lhs < rhs - eps {
            n_violations += 1;
            if violations.len() < MAX_STORED_VIOLATIONS {
                violations.push(ViolationRecord {
                    theta: theta.iter().map(|c| c.as_f64()).collect(),
                    lhs: lhs.as_f64(),
                    rhs: rhs.as_f64(),
                });
            }
        }
    }
    let certified = n_violations == 0;
    Ok(Certificate {
        assumption: match kind {
            GrowthCheckKind::LocalizedDissipativity => "localized_dissipativity",
            GrowthCheckKind::Lojasiewicz => "lojasiewicz",
        }
        .to_string(),
        params: serde_json::json!({
            "radius": big_r.as_f64(),
            "growth": g.describe(),
            "n_violations": n_violations,
        }),
        n_samples,
        violations,
        certified,
    })
}

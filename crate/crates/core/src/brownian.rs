//! Closed forms for the constant-coefficient reserve `dX = μ dt + σ dB`,
//! `μ < 0`.
//!
//! The first-passage transform is `φ_a(λ) = exp(-K_λ a)` with
//! `K_λ = (μ + √(μ² + 2λσ²)) / σ²`; every cost below is built from it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{positive, DiffusionSpec, FundParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrownianParams {
    pub mu: f64,
    pub sigma: f64,
}

impl BrownianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu < 0.0 && mu.is_finite()) {
            return Err(Error::invalid(
                "mu",
                format!("drift must be negative for certain ruin, got {mu}"),
            ));
        }
        positive("sigma", sigma)?;
        Ok(BrownianParams { mu, sigma })
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Smallest admissible transform argument, `-μ²/(2σ²)`.
    pub fn lambda_floor(&self) -> f64 {
        -self.mu * self.mu / (2.0 * self.variance())
    }

    pub fn to_spec(&self) -> DiffusionSpec {
        DiffusionSpec::brownian(self.mu, self.sigma).expect("validated parameters")
    }

    /// Largest drift for which the finite-horizon asymptotics exist at
    /// discount rate `r`: `-√(2rσ²/3)`.
    pub fn asymptotic_drift_bound(&self, r: f64) -> f64 {
        -(2.0 * r * self.variance() / 3.0).sqrt()
    }
}

/// `K_λ` for `λ ≥ 0`.
pub fn k_lambda(p: &BrownianParams, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::DomainError {
            lambda,
            reason: "k_lambda requires lambda >= 0; use k_lambda_extended".into(),
        });
    }
    k_lambda_extended(p, lambda)
}

/// `K_λ` continued to `λ ≥ -μ²/(2σ²)` with the principal root.
pub fn k_lambda_extended(p: &BrownianParams, lambda: f64) -> Result<f64> {
    let disc = p.mu * p.mu + 2.0 * lambda * p.variance();
    if !(disc >= 0.0) {
        return Err(Error::DomainError {
            lambda,
            reason: format!("mu^2 + 2 lambda sigma^2 = {disc} < 0"),
        });
    }
    // (μ + s)/σ² == 2λ/(s - μ); the right side avoids cancellation for μ < 0
    Ok(2.0 * lambda / (disc.sqrt() - p.mu))
}

/// `φ_a(λ) = E[exp(-λ S_a)] = exp(-K_λ a)`.
pub fn fpt_laplace(p: &BrownianParams, a: f64, lambda: f64) -> Result<f64> {
    positive("a", a)?;
    Ok((-k_lambda_extended(p, lambda)? * a).exp())
}

/// Inverse-Gaussian first-passage density of level 0 from `a`.
pub fn fpt_density(p: &BrownianParams, a: f64, s: f64) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    let num = a + p.mu * s;
    let expo = -num * num / (2.0 * p.variance() * s);
    a / (p.sigma * (2.0 * std::f64::consts::PI * s * s * s).sqrt()) * expo.exp()
}

/// `F_a(s) = P(S_a ≤ s)`.
pub fn fpt_cdf(p: &BrownianParams, a: f64, s: f64) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    if s.is_infinite() {
        return 1.0;
    }
    let sd = p.sigma * s.sqrt();
    let first = std_normal_cdf((-a - p.mu * s) / sd);
    // exp(-2μa/σ²) Φ(-(a - μ s)/(σ√s)), combined in log space
    let z = (a - p.mu * s) / (sd * std::f64::consts::SQRT_2);
    let c = -2.0 * p.mu * a / p.variance();
    let second = 0.5 * (c - z * z).exp() * erfcx(z);
    (first + second).clamp(0.0, 1.0)
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Scaled complementary error function `exp(z²) erfc(z)` for `z ≥ 0`.
fn erfcx(z: f64) -> f64 {
    if z < 25.0 {
        (z * z).exp() * libm::erfc(z)
    } else {
        let w = 1.0 / (2.0 * z * z);
        let series = 1.0 - w + 3.0 * w * w - 15.0 * w * w * w + 105.0 * w.powi(4);
        series / (z * std::f64::consts::PI.sqrt())
    }
}

/// Expected present value of all injections, `θφ_a(r)/(1 - φ_θ(r))`.
pub fn perpetual_cost(p: &BrownianParams, f: &FundParams) -> f64 {
    let k = k_lambda_extended(p, f.r).expect("r > 0 is always in the domain");
    f.theta * (-k * f.a).exp() / -(-k * f.theta).exp_m1()
}

/// Small-injection limit `exp(-K_r a)/K_r`.
pub fn perpetual_cost_limit(p: &BrownianParams, a: f64, r: f64) -> Result<f64> {
    positive("a", a)?;
    positive("r", r)?;
    let k = k_lambda(p, r)?;
    Ok((-k * a).exp() / k)
}

/// `-2μ - √(μ² + 2rσ²)`, positive exactly when the decay root exists.
fn root_gap(p: &BrownianParams, r: f64) -> f64 {
    -2.0 * p.mu - (p.mu * p.mu + 2.0 * r * p.variance()).sqrt()
}

fn check_asymptotic(p: &BrownianParams, r: f64) -> Result<()> {
    positive("r", r)?;
    let bound = p.asymptotic_drift_bound(r);
    if p.mu < bound && root_gap(p, r) > 0.0 {
        Ok(())
    } else {
        Err(Error::ConditionViolated(format!(
            "asymptotics need mu < -sqrt(2 r sigma^2 / 3) = {bound:.6}, got mu = {}",
            p.mu
        )))
    }
}

/// Exponential rate at which the finite-horizon cost approaches the
/// perpetual cost. Independent of `theta`.
pub fn decay_rate(p: &BrownianParams, theta: f64, r: f64) -> Result<f64> {
    positive("theta", theta)?;
    check_asymptotic(p, r)?;
    let g = root_gap(p, r);
    Ok((p.mu * p.mu - g * g) / (2.0 * p.variance()))
}

/// Coefficient of `exp(-k t)` in the large-`t` expansion. Independent of
/// `a` and `theta`.
pub fn asymptotic_coefficient(p: &BrownianParams, f: &FundParams) -> Result<f64> {
    check_asymptotic(p, f.r)?;
    let g = root_gap(p, f.r);
    Ok(2.0 * p.variance() * g / (p.mu * p.mu - g * g))
}

/// Large-`t` approximation of the expected cost up to `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticCost {
    pub t: f64,
    pub value: f64,
    pub perpetual: f64,
    pub coefficient: f64,
    pub decay_rate: f64,
    /// `t ≥ 1/k`; earlier values are outside the regime the expansion targets.
    pub in_asymptotic_regime: bool,
}

impl AsymptoticCost {
    pub(crate) fn assemble(t: f64, perpetual: f64, coefficient: f64, decay_rate: f64) -> Self {
        AsymptoticCost {
            t,
            value: perpetual - coefficient * (-decay_rate * t).exp(),
            perpetual,
            coefficient,
            decay_rate,
            in_asymptotic_regime: t * decay_rate >= 1.0,
        }
    }
}

/// `v* - c* exp(-k* t)`.
pub fn finite_cost_approx(p: &BrownianParams, f: &FundParams, t: f64) -> Result<AsymptoticCost> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    let k = decay_rate(p, f.theta, f.r)?;
    let c = asymptotic_coefficient(p, f)?;
    Ok(AsymptoticCost::assemble(t, perpetual_cost(p, f), c, k))
}

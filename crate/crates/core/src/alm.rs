//! Asset-liability scheme: geometric Brownian assets against exponentially
//! growing deterministic liabilities, topped up on each shortfall so that the
//! log funding ratio restarts at `theta`.
//!
//! `Y(t) = ln(A(t)/L(t))` is a Brownian reserve with drift `mu` and
//! volatility `sigma`, so every cost reduces to the `brownian` closed forms
//! at the liability-adjusted discount rate `r - rho`.

use serde::Serialize;

use crate::brownian::{self, AsymptoticCost, BrownianParams};
use crate::error::{Error, Result};
use crate::model::{positive, FundParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlmParams {
    /// Initial liability level.
    pub b: f64,
    /// Initial log funding ratio.
    pub a: f64,
    /// Liability growth rate.
    pub rho: f64,
    pub mu: f64,
    pub sigma: f64,
    pub theta: f64,
    pub r: f64,
}

impl AlmParams {
    pub fn new(b: f64, a: f64, rho: f64, mu: f64, sigma: f64, theta: f64, r: f64) -> Result<Self> {
        positive("b", b)?;
        positive("a", a)?;
        positive("theta", theta)?;
        if !rho.is_finite() {
            return Err(Error::invalid("rho", "must be finite"));
        }
        if !(r > rho) || !r.is_finite() {
            return Err(Error::invalid(
                "r",
                format!("discount rate must exceed liability growth (r > rho), got r = {r}, rho = {rho}"),
            ));
        }
        BrownianParams::new(mu, sigma)?;
        Ok(AlmParams {
            b,
            a,
            rho,
            mu,
            sigma,
            theta,
            r,
        })
    }

    /// `r - rho`, the rate at which injections are effectively discounted.
    pub fn net_rate(&self) -> f64 {
        self.r - self.rho
    }

    /// `a·b·rho + mu·sigma`; reported for information only.
    pub fn sign_diagnostic(&self) -> f64 {
        self.a * self.b * self.rho + self.mu * self.sigma
    }

    /// `b (e^θ - 1) / θ`
    pub fn injection_multiplier(&self) -> f64 {
        self.b * self.theta.exp_m1() / self.theta
    }

    fn reduced_fund(&self) -> FundParams {
        FundParams {
            a: self.a,
            theta: self.theta,
            r: self.net_rate(),
        }
    }
}

/// The log funding ratio as a Brownian reserve and its starting level.
pub fn log_funding_ratio(alm: &AlmParams) -> (BrownianParams, f64) {
    (
        BrownianParams {
            mu: alm.mu,
            sigma: alm.sigma,
        },
        alm.a,
    )
}

/// `L (e^θ - 1)`: the top-up that lifts assets from `L` to `L e^θ`.
pub fn injection_amount(alm: &AlmParams, liability_at_hit: f64) -> Result<f64> {
    positive("liability_at_hit", liability_at_hit)?;
    Ok(liability_at_hit * alm.theta.exp_m1())
}

pub fn perpetual_cost_alm(alm: &AlmParams) -> f64 {
    let (p, _) = log_funding_ratio(alm);
    alm.injection_multiplier() * brownian::perpetual_cost(&p, &alm.reduced_fund())
}

/// Small-top-up limit `b exp(-K a)/K` at rate `r - rho`.
pub fn perpetual_cost_alm_limit(alm: &AlmParams) -> Result<f64> {
    let (p, a) = log_funding_ratio(alm);
    Ok(alm.b * brownian::perpetual_cost_limit(&p, a, alm.net_rate())?)
}

/// Large-`t` approximation of the expected cost up to `t`, scaled from the
/// Brownian result at rate `r - rho`.
pub fn finite_cost_alm(alm: &AlmParams, t: f64) -> Result<AsymptoticCost> {
    let (p, _) = log_funding_ratio(alm);
    let base = brownian::finite_cost_approx(&p, &alm.reduced_fund(), t)?;
    let m = alm.injection_multiplier();
    Ok(AsymptoticCost {
        value: m * base.value,
        perpetual: m * base.perpetual,
        coefficient: m * base.coefficient,
        ..base
    })
}

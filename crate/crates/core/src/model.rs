//! Reserve diffusion specification, scale and speed functions, and the
//! non-autonomy test.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quadrature::integrate;

/// A coefficient function of the state `x`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// `c0 + c1 * x`
    Affine { c0: f64, c1: f64 },
    Expr(Expr),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Coefficient {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Affine { c0, c1 } => c0 + c1 * x,
            Coefficient::Expr(e) => e.eval(x),
            Coefficient::Custom(f) => f(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::Affine { c0, c1 } if *c1 == 0.0 => Some(*c0),
            Coefficient::Expr(e) => e.constant_value(),
            _ => None,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "{c}"),
            Coefficient::Affine { c0, c1 } => write!(f, "{c0} + {c1}*x"),
            Coefficient::Expr(e) => write!(f, "{e}"),
            Coefficient::Custom(_) => f.write_str("<custom>"),
        }
    }
}

/// Time-homogeneous diffusion on `[0, ∞)`: drift `μ(x)` and squared
/// diffusion coefficient `σ²(x)`, with `x0` as integration origin for the
/// scale and speed functions.
#[derive(Clone, Debug)]
pub struct DiffusionSpec {
    drift: Coefficient,
    diffusion_sq: Coefficient,
    reference_point: f64,
}

const SINGULAR_SHIFTS: [f64; 4] = [1e-9, 1e-7, 1e-5, 1e-3];

impl DiffusionSpec {
    /// Builds a spec; `x0` defaults to 0 and is nudged to a small positive
    /// point when the coefficients are not evaluable at 0.
    pub fn new(drift: Coefficient, diffusion_sq: Coefficient) -> Result<Self> {
        let mut spec = DiffusionSpec {
            drift,
            diffusion_sq,
            reference_point: 0.0,
        };
        if spec.check_point(0.0).is_err() {
            let shift = SINGULAR_SHIFTS
                .iter()
                .copied()
                .find(|&e| spec.check_point(e).is_ok())
                .ok_or_else(|| {
                    Error::invalid("diffusion_sq", "coefficients not evaluable near 0")
                })?;
            spec.reference_point = shift;
        }
        Ok(spec)
    }

    /// Constant drift `mu` and volatility `sigma`.
    pub fn brownian(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        Self::new(Coefficient::Constant(mu), Coefficient::Constant(sigma * sigma))
    }

    /// Drift `c0 + c1 x`, constant volatility `sigma`.
    pub fn affine(c0: f64, c1: f64, sigma: f64) -> Result<Self> {
        if !(c0.is_finite() && c1.is_finite()) {
            return Err(Error::invalid("c0", "drift coefficients must be finite"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        Self::new(
            Coefficient::Affine { c0, c1 },
            Coefficient::Constant(sigma * sigma),
        )
    }

    pub fn from_exprs(drift: &str, diffusion_sq: &str) -> Result<Self> {
        Self::new(
            Coefficient::Expr(Expr::parse(drift)?),
            Coefficient::Expr(Expr::parse(diffusion_sq)?),
        )
    }

    /// Parses `brownian(mu, sigma)` or `affine(c0, c1, sigma)`; arguments may
    /// be positional or named (`brownian(mu=-0.5, sigma=1)`).
    pub fn from_preset(src: &str) -> Result<Self> {
        let src = src.trim();
        let open = src
            .find('(')
            .ok_or_else(|| Error::invalid("preset", format!("expected name(args), got `{src}`")))?;
        if !src.ends_with(')') {
            return Err(Error::invalid("preset", "missing closing `)`"));
        }
        let name = src[..open].trim();
        let names: &[&'static str] = match name {
            "brownian" => &["mu", "sigma"],
            "affine" => &["c0", "c1", "sigma"],
            _ => {
                return Err(Error::invalid(
                    "preset",
                    format!("unknown preset `{name}` (expected brownian or affine)"),
                ))
            }
        };
        let mut values: Vec<Option<f64>> = vec![None; names.len()];
        let body = &src[open + 1..src.len() - 1];
        for (i, arg) in body.split(',').map(str::trim).filter(|s| !s.is_empty()).enumerate() {
            let (slot, text) = match arg.split_once('=') {
                Some((k, v)) => {
                    let k = k.trim();
                    let slot = names.iter().position(|n| *n == k).ok_or_else(|| {
                        Error::invalid("preset", format!("{name}: unknown argument `{k}`"))
                    })?;
                    (slot, v.trim())
                }
                None if i < names.len() => (i, arg),
                None => {
                    return Err(Error::invalid("preset", format!("{name}: too many arguments")))
                }
            };
            let v: f64 = text.parse().map_err(|_| {
                Error::invalid(names[slot], format!("{name}: `{text}` is not a number"))
            })?;
            values[slot] = Some(v);
        }
        let mut args = Vec::with_capacity(names.len());
        for (n, v) in names.iter().zip(&values) {
            args.push(v.ok_or_else(|| Error::invalid(n, format!("{name}: missing argument `{n}`")))?);
        }
        match name {
            "brownian" => Self::brownian(args[0], args[1]),
            _ => Self::affine(args[0], args[1], args[2]),
        }
    }

    pub fn with_reference_point(mut self, x0: f64) -> Result<Self> {
        self.check_point(x0)?;
        self.reference_point = x0;
        Ok(self)
    }

    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        self.drift.eval(x)
    }

    #[inline]
    pub fn diffusion_sq(&self, x: f64) -> f64 {
        self.diffusion_sq.eval(x)
    }

    pub fn reference_point(&self) -> f64 {
        self.reference_point
    }

    pub fn drift_coefficient(&self) -> &Coefficient {
        &self.drift
    }

    pub fn diffusion_coefficient(&self) -> &Coefficient {
        &self.diffusion_sq
    }

    /// `(mu, sigma)` when both coefficients are constant.
    pub fn constant_params(&self) -> Option<(f64, f64)> {
        let mu = self.drift.as_constant()?;
        let s2 = self.diffusion_sq.as_constant()?;
        Some((mu, s2.sqrt()))
    }

    /// Checks the coefficient invariants at `x`.
    pub fn check_point(&self, x: f64) -> Result<()> {
        let m = self.drift(x);
        let s2 = self.diffusion_sq(x);
        if !m.is_finite() {
            return Err(Error::invalid("drift", format!("not finite at x = {x}")));
        }
        if !(s2.is_finite() && s2 > 0.0) {
            return Err(Error::invalid(
                "diffusion_sq",
                format!("must be finite and positive, got {s2} at x = {x}"),
            ));
        }
        Ok(())
    }

    /// `2 μ(y) / σ²(y)`
    #[inline]
    fn log_density_rate(&self, y: f64) -> f64 {
        2.0 * self.drift(y) / self.diffusion_sq(y)
    }

    fn log_integral(&self, from: f64, to: f64) -> Result<f64> {
        if let Some((mu, sigma)) = self.constant_params() {
            return Ok(2.0 * mu / (sigma * sigma) * (to - from));
        }
        Ok(integrate(|y| self.log_density_rate(y), from, to, 1e-14, 1e-13)?.value)
    }
}

/// Initial reserve, regeneration level, and discount rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundParams {
    pub a: f64,
    pub theta: f64,
    pub r: f64,
}

impl FundParams {
    pub fn new(a: f64, theta: f64, r: f64) -> Result<Self> {
        positive("a", a)?;
        positive("theta", theta)?;
        positive("r", r)?;
        Ok(FundParams { a, theta, r })
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

const SCALE_REL_TOL: f64 = 1e-11;

fn check_range(spec: &DiffusionSpec, x: f64) -> Result<()> {
    let x0 = spec.reference_point;
    if !(x >= x0) || !x.is_finite() {
        return Err(Error::invalid("x", format!("must satisfy x >= x0 = {x0}, got {x}")));
    }
    spec.check_point(x)
}

/// Scale function `q(x) = ∫_{x0}^{x} exp(-∫_{x0}^{z} 2μ/σ²) dz`.
pub fn scale_function(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    check_range(spec, x)?;
    let x0 = spec.reference_point;
    let mut inner_err = None;
    let q = integrate(
        |z| match spec.log_integral(x0, z) {
            Ok(i) => (-i).exp(),
            Err(e) => {
                inner_err.get_or_insert(e);
                f64::NAN
            }
        },
        x0,
        x,
        1e-300,
        SCALE_REL_TOL,
    );
    if let Some(e) = inner_err {
        return Err(e);
    }
    Ok(q?.value)
}

/// Speed function `p(x) = ∫_{x0}^{x} (2/σ²(z)) exp(∫_{x0}^{z} 2μ/σ²) dz`.
pub fn speed_function(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    check_range(spec, x)?;
    let x0 = spec.reference_point;
    let mut inner_err = None;
    let p = integrate(
        |z| match spec.log_integral(x0, z) {
            Ok(i) => 2.0 / spec.diffusion_sq(z) * i.exp(),
            Err(e) => {
                inner_err.get_or_insert(e);
                f64::NAN
            }
        },
        x0,
        x,
        1e-300,
        SCALE_REL_TOL,
    );
    if let Some(e) = inner_err {
        return Err(e);
    }
    Ok(p?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FundClass {
    /// Ruin certain with finite expected time from every level.
    NonAutonomous,
    RuinCertainInfiniteMean,
    RuinUncertain,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitVerdict {
    Divergent,
    Convergent,
    Undetermined,
}

/// Values of `q` or `p` along the truncation schedule.
#[derive(Debug, Clone, Serialize)]
pub struct LimitDiagnostics {
    pub verdict: LimitVerdict,
    pub truncation_points: Vec<f64>,
    pub values: Vec<f64>,
    /// Ratio of the last two values (growth under one doubling).
    pub last_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub class: FundClass,
    pub scale: LimitDiagnostics,
    pub speed: Option<LimitDiagnostics>,
}

/// Doubling multiplies the integral by at least this much ⇒ growth step.
pub const DIVERGENCE_RATIO: f64 = 1.5;
pub const DIVERGENCE_STREAK: usize = 3;
/// Relative increment below this ⇒ settled step.
pub const CONVERGENCE_INCREMENT: f64 = 1e-6;
pub const CONVERGENCE_STREAK: usize = 2;
/// Truncation points `x0 + 2^k`, `k = 0..=MAX_DOUBLINGS`.
pub const MAX_DOUBLINGS: i32 = 20;

#[derive(Clone, Copy)]
enum Which {
    Scale,
    Speed,
}

fn limit_behaviour(spec: &DiffusionSpec, which: Which) -> LimitDiagnostics {
    let x0 = spec.reference_point;
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut total = 0.0_f64;
    let mut log_at = 0.0_f64;
    let mut prev_x = x0;
    let (mut grow, mut settle) = (0usize, 0usize);
    let mut verdict = LimitVerdict::Undetermined;
    let mut last_ratio = f64::NAN;

    for k in 0..=MAX_DOUBLINGS {
        let x = x0 + 2f64.powi(k);
        let base = log_at;
        let seg_start = prev_x;
        let integrand = |z: f64| -> f64 {
            let inner = match spec.log_integral(seg_start, z) {
                Ok(v) => base + v,
                Err(_) => return f64::NAN,
            };
            match which {
                Which::Scale => (-inner).exp(),
                Which::Speed => 2.0 / spec.diffusion_sq(z) * inner.exp(),
            }
        };
        let abs_tol = (total * 1e-12).max(1e-300);
        let step = integrate(integrand, prev_x, x, abs_tol, 1e-10);
        let seg_log = spec.log_integral(prev_x, x);
        let (step, seg_log) = match (step, seg_log) {
            (Ok(s), Ok(l)) => (s.value, l),
            // overflow of the integrand means unbounded growth
            (Err(_), Ok(l)) if growth_overflows(which, base + l) => (f64::INFINITY, l),
            _ => break,
        };
        let new_total = total + step;
        points.push(x);
        values.push(new_total);
        if !new_total.is_finite() {
            verdict = LimitVerdict::Divergent;
            last_ratio = f64::INFINITY;
            break;
        }
        if total > 0.0 {
            last_ratio = new_total / total;
            if last_ratio >= DIVERGENCE_RATIO {
                grow += 1;
            } else {
                grow = 0;
            }
            if (new_total - total) / new_total < CONVERGENCE_INCREMENT {
                settle += 1;
            } else {
                settle = 0;
            }
        }
        total = new_total;
        log_at = base + seg_log;
        prev_x = x;
        if grow >= DIVERGENCE_STREAK {
            verdict = LimitVerdict::Divergent;
            break;
        }
        if settle >= CONVERGENCE_STREAK {
            verdict = LimitVerdict::Convergent;
            break;
        }
    }
    LimitDiagnostics {
        verdict,
        truncation_points: points,
        values,
        last_ratio,
    }
}

fn growth_overflows(which: Which, log_at_end: f64) -> bool {
    match which {
        Which::Scale => -log_at_end > 700.0,
        Which::Speed => log_at_end > 700.0,
    }
}

/// Decides whether ruin is certain (`q(∞) = ∞`) with finite mean
/// (`p(∞) < ∞`) from the behaviour of `q` and `p` along a geometric
/// truncation schedule.
pub fn classify_fund(spec: &DiffusionSpec) -> Classification {
    let scale = limit_behaviour(spec, Which::Scale);
    match scale.verdict {
        LimitVerdict::Convergent => Classification {
            class: FundClass::RuinUncertain,
            scale,
            speed: None,
        },
        LimitVerdict::Undetermined => Classification {
            class: FundClass::Inconclusive,
            scale,
            speed: None,
        },
        LimitVerdict::Divergent => {
            let speed = limit_behaviour(spec, Which::Speed);
            let class = match speed.verdict {
                LimitVerdict::Convergent => FundClass::NonAutonomous,
                LimitVerdict::Divergent => FundClass::RuinCertainInfiniteMean,
                LimitVerdict::Undetermined => FundClass::Inconclusive,
            };
            Classification {
                class,
                scale,
                speed: Some(speed),
            }
        }
    }
}

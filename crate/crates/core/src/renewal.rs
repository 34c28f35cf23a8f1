//! Finite-horizon cost by two exact routes: the series over the
//! distribution functions `G_n` of the ruin epochs,
//!
//! ```text
//! w(t) = θ φ_a(r) Σ_{n≥1} φ_θ(r)^{n-1} G_n(t),
//! ```
//!
//! and a forward march of the equivalent defective renewal equation
//!
//! ```text
//! w(t) = θ φ_a(r) F_a(t) + φ_θ(r) ∫_0^t w(t - s) f_θ(s) ds.
//! ```
//!
//! Each epoch is weighted by its expected discount rather than the realized
//! one, so `w(t)` is not `E[Σ_{T_n ≤ t} θ e^{-r T_n}]` at finite `t`; the
//! two share the perpetual limit. `montecarlo` estimates the latter.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::brownian::{self, BrownianParams};
use crate::error::{Error, Result};
use crate::model::FundParams;

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Distribution of a first passage time to 0: cdf, density, and transform
/// at the discount rate.
#[derive(Clone)]
pub struct FirstPassageLaw {
    cdf: TimeFn,
    density: TimeFn,
    pub laplace_at_r: f64,
    /// Bound on the error of `cdf`/`density` (zero for closed forms).
    pub bias: f64,
}

impl fmt::Debug for FirstPassageLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstPassageLaw")
            .field("laplace_at_r", &self.laplace_at_r)
            .field("bias", &self.bias)
            .finish_non_exhaustive()
    }
}

impl FirstPassageLaw {
    pub fn new(
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        laplace_at_r: f64,
        bias: f64,
    ) -> Result<Self> {
        if !(laplace_at_r > 0.0 && laplace_at_r < 1.0) {
            return Err(Error::invalid(
                "laplace_at_r",
                format!("must lie in (0, 1), got {laplace_at_r}"),
            ));
        }
        Ok(FirstPassageLaw {
            cdf: Arc::new(cdf),
            density: Arc::new(density),
            laplace_at_r,
            bias,
        })
    }

    /// Closed-form law of the passage time from `level` for a Brownian
    /// reserve, with its transform at rate `r`.
    pub fn brownian(p: &BrownianParams, level: f64, r: f64) -> Result<Self> {
        let phi = brownian::fpt_laplace(p, level, r)?;
        let (pc, pd) = (*p, *p);
        Self::new(
            move |s| brownian::fpt_cdf(&pc, level, s),
            move |s| brownian::fpt_density(&pd, level, s),
            phi,
            0.0,
        )
    }

    #[inline]
    pub fn cdf(&self, s: f64) -> f64 {
        (self.cdf)(s)
    }

    #[inline]
    pub fn density(&self, s: f64) -> f64 {
        (self.density)(s)
    }
}

/// Uniform time grid `0, h, 2h, ..., n h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub step: f64,
    pub cells: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::invalid("step", "grid needs positive step and horizon"));
        }
        let cells = (t_max / step).round().max(1.0) as usize;
        Ok(TimeGrid {
            step: t_max / cells as f64,
            cells,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.step * self.cells as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| i as f64 * self.step).collect()
    }

    fn coarsened(&self) -> Option<Self> {
        (self.cells % 2 == 0 && self.cells >= 4).then(|| TimeGrid {
            step: 2.0 * self.step,
            cells: self.cells / 2,
        })
    }
}

/// Horizon covering transient and asymptotic windows: `8/k` when a decay
/// rate is known, else `8 E[S_θ] (1 + a/θ)`.
pub fn default_horizon(decay_rate: Option<f64>, mean_step: f64, f: &FundParams) -> f64 {
    match decay_rate {
        Some(k) if k > 0.0 => 8.0 / k,
        _ => 8.0 * mean_step * (1.0 + f.a / f.theta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Series,
    Renewal,
    Asymptotic,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Series => "series",
            Method::Renewal => "renewal",
            Method::Asymptotic => "asymptotic",
            Method::MonteCarlo => "montecarlo",
        })
    }
}

/// Expected finite-horizon cost on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostCurve {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub err: Vec<f64>,
    pub method: Method,
}

impl CostCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Linear interpolation of `(w, err)` at `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        if n == 0 {
            return (f64::NAN, f64::NAN);
        }
        if t <= self.t[0] {
            return (self.w[0], self.err[0]);
        }
        if t >= self.t[n - 1] {
            return (self.w[n - 1], self.err[n - 1]);
        }
        let i = self.t.partition_point(|&s| s <= t) - 1;
        let u = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        (
            self.w[i] + u * (self.w[i + 1] - self.w[i]),
            self.err[i].max(self.err[i + 1]),
        )
    }

    /// CSV with header `t,w,err,method`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,w,err,method")?;
        for i in 0..self.t.len() {
            writeln!(out, "{},{},{},{}", self.t[i], self.w[i], self.err[i], self.method)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Distribution functions `G_1, ..., G_n` of the ruin epochs on a grid.
#[derive(Debug, Clone)]
pub struct EpochDistributions {
    pub grid: TimeGrid,
    pub curves: Vec<Vec<f64>>,
}

impl EpochDistributions {
    /// `G_n(t)` by linear interpolation (`n` counted from 1).
    pub fn value(&self, n: usize, t: f64) -> f64 {
        let g = &self.curves[n - 1];
        let s = (t / self.grid.step).clamp(0.0, self.grid.cells as f64);
        let i = (s.floor() as usize).min(self.grid.cells - 1);
        let u = s - i as f64;
        g[i] + u * (g[i + 1] - g[i])
    }
}

/// Monotonicity slack allowed before a grid is declared too coarse.
const MONOTONE_SLACK: f64 = 1e-9;

fn trapezoid_convolution(g: &[f64], f: &[f64], h: f64) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    for i in 1..n {
        let mut acc = 0.5 * (g[i] * f[0] + g[0] * f[i]);
        for j in 1..i {
            acc += g[i - j] * f[j];
        }
        out[i] = h * acc;
    }
    out
}

/// Below this, `G_n(t_max)` and all later epochs are stored as zero.
const NEGLIGIBLE_MASS: f64 = 1e-18;

/// `G_1 = F_a`, `G_{n+1} = G_n * f_θ`. Stops convolving once `G_n` is
/// negligible on the whole grid.
pub fn convolve_passage_laws(
    first: &FirstPassageLaw,
    step: &FirstPassageLaw,
    n: usize,
    grid: &TimeGrid,
) -> Result<EpochDistributions> {
    if n == 0 {
        return Err(Error::invalid("n", "at least one epoch is required"));
    }
    let times = grid.times();
    let dens: Vec<f64> = times.iter().map(|&s| step.density(s)).collect();
    let g1: Vec<f64> = times.iter().map(|&s| first.cdf(s)).collect();
    check_monotone(&g1, "G_1")?;
    let mut curves = vec![g1];
    while curves.len() < n {
        let prev = curves.last().unwrap();
        if prev.last().copied().unwrap_or(0.0) < NEGLIGIBLE_MASS {
            curves.push(vec![0.0; prev.len()]);
            continue;
        }
        let next = trapezoid_convolution(prev, &dens, grid.step);
        check_monotone(&next, "G_n")?;
        if next
            .iter()
            .zip(prev)
            .any(|(a, b)| *a > *b + MONOTONE_SLACK.max(1e-6 * b))
        {
            return Err(Error::GridTooCoarse(format!(
                "G_{} exceeds G_{} somewhere on the grid (step {})",
                curves.len() + 1,
                curves.len(),
                grid.step
            )));
        }
        curves.push(next);
    }
    Ok(EpochDistributions {
        grid: *grid,
        curves,
    })
}

fn check_monotone(v: &[f64], what: &str) -> Result<()> {
    let top = v.iter().cloned().fold(0.0_f64, f64::max).max(1e-300);
    for w in v.windows(2) {
        if w[1] < w[0] - MONOTONE_SLACK * top {
            return Err(Error::GridTooCoarse(format!("{what} decreases on the grid")));
        }
    }
    Ok(())
}

/// Tail tolerance for truncated series.
pub const SERIES_TOL: f64 = 1e-8;

/// Probability generating function of the number of ruins by `t`,
/// `γ(t, ξ) = 1 - (1 - ξ) Σ ξ^{n-1} G_n(t)`.
pub fn generating_function(epochs: &EpochDistributions, t: f64, xi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::invalid("xi", "must lie in [0, 1]"));
    }
    if xi == 1.0 {
        return Ok(1.0);
    }
    let n_max = epochs.curves.len();
    let tail = xi.powi(n_max as i32) * epochs.value(n_max, t);
    if tail > SERIES_TOL {
        return Err(Error::SeriesTruncation(format!(
            "{n_max} epochs leave a tail of {tail:e} at t = {t}, xi = {xi}"
        )));
    }
    let mut sum = 0.0;
    let mut w = 1.0;
    for n in 1..=n_max {
        sum += w * epochs.value(n, t);
        w *= xi;
    }
    Ok((1.0 - (1.0 - xi) * sum).clamp(0.0, 1.0))
}

/// Smallest `n` with `θ φ_a φ_θ^n / (1 - φ_θ) < tol`.
pub fn required_terms(first: &FirstPassageLaw, step: &FirstPassageLaw, f: &FundParams, tol: f64) -> usize {
    let q = step.laplace_at_r;
    let lead = f.theta * first.laplace_at_r / (1.0 - q);
    if lead <= tol {
        return 1;
    }
    ((tol / lead).ln() / q.ln()).ceil().max(1.0) as usize
}

/// Truncated series value and its certified tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn series_on(
    epochs: &EpochDistributions,
    first: &FirstPassageLaw,
    step: &FirstPassageLaw,
    f: &FundParams,
) -> Vec<f64> {
    let q = step.laplace_at_r;
    let lead = f.theta * first.laplace_at_r;
    let m = epochs.grid.cells + 1;
    let mut acc = vec![0.0; m];
    let mut w = lead;
    for g in &epochs.curves {
        for (a, v) in acc.iter_mut().zip(g) {
            *a += w * v;
        }
        w *= q;
    }
    acc
}

/// Certified bound `θ φ_a φ_θ^n / (1 - φ_θ)` on the omitted series terms.
pub fn series_tail_bound(first: &FirstPassageLaw, step: &FirstPassageLaw, f: &FundParams, n_max: usize) -> f64 {
    let q = step.laplace_at_r;
    f.theta * first.laplace_at_r * q.powi(n_max as i32) / (1.0 - q)
}

/// `w(t) = θ φ_a(r) Σ φ_θ(r)^{n-1} G_n(t)` with `n_max` terms.
pub fn series_cost(
    first: &FirstPassageLaw,
    step: &FirstPassageLaw,
    f: &FundParams,
    t: f64,
    n_max: usize,
) -> Result<SeriesValue> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    let tail = series_tail_bound(first, step, f, n_max);
    if tail > SERIES_TOL {
        return Err(Error::SeriesTruncation(format!(
            "{n_max} terms leave a tail bound of {tail:e} (need {})",
            required_terms(first, step, f, SERIES_TOL)
        )));
    }
    if t == 0.0 {
        return Ok(SeriesValue {
            value: f.theta * first.laplace_at_r * series_zero_mass(first),
            tail_bound: tail,
        });
    }
    let grid = TimeGrid::new(t, (t / 4000.0).min(0.01))?;
    let curve = series_curve(first, step, f, &grid, n_max)?;
    let last = curve.len() - 1;
    Ok(SeriesValue {
        value: curve.w[last],
        tail_bound: curve.err[last],
    })
}

fn series_zero_mass(first: &FirstPassageLaw) -> f64 {
    first.cdf(0.0)
}

/// Series route on a whole grid; `err` combines the Richardson estimate of
/// the quadrature error, the tail bound and the law bias.
pub fn series_curve(
    first: &FirstPassageLaw,
    step: &FirstPassageLaw,
    f: &FundParams,
    grid: &TimeGrid,
    n_max: usize,
) -> Result<CostCurve> {
    let tail = series_tail_bound(first, step, f, n_max);
    if tail > SERIES_TOL {
        return Err(Error::SeriesTruncation(format!(
            "{n_max} terms leave a tail bound of {tail:e}"
        )));
    }
    let fine = series_on(&convolve_passage_laws(first, step, n_max, grid)?, first, step, f);
    let coarse = match grid.coarsened() {
        Some(cg) => Some(series_on(&convolve_passage_laws(first, step, n_max, &cg)?, first, step, f)),
        None => None,
    };
    let law_bias = (first.bias + step.bias) * f.theta / (1.0 - step.laplace_at_r);
    Ok(finish_curve(grid, fine, coarse, tail + law_bias, Method::Series))
}

fn finish_curve(
    grid: &TimeGrid,
    fine: Vec<f64>,
    coarse: Option<Vec<f64>>,
    floor: f64,
    method: Method,
) -> CostCurve {
    let n = fine.len();
    let mut err = vec![floor; n];
    if let Some(c) = coarse {
        let even: Vec<f64> = (0..c.len()).map(|j| (fine[2 * j] - c[j]).abs() / 3.0).collect();
        for (i, e) in err.iter_mut().enumerate() {
            let richardson = if i % 2 == 0 {
                even[i / 2]
            } else {
                even[i / 2].max(even[(i / 2 + 1).min(even.len() - 1)])
            };
            *e += richardson;
        }
    }
    CostCurve {
        t: grid.times(),
        w: fine,
        err,
        method,
    }
}

fn march(first: &FirstPassageLaw, step: &FirstPassageLaw, f: &FundParams, grid: &TimeGrid) -> Result<Vec<f64>> {
    let h = grid.step;
    let times = grid.times();
    let q = step.laplace_at_r;
    let lead = f.theta * first.laplace_at_r;
    let dens: Vec<f64> = times.iter().map(|&s| step.density(s)).collect();
    let implicit = 1.0 - 0.5 * q * h * dens[0];
    if !(implicit > 0.0) {
        return Err(Error::GridTooCoarse(format!(
            "step {h} too large for density {} at 0",
            dens[0]
        )));
    }
    let mut w = vec![0.0; times.len()];
    w[0] = lead * first.cdf(0.0);
    for i in 1..times.len() {
        let mut acc = 0.5 * dens[i] * w[0];
        for j in 1..i {
            acc += dens[j] * w[i - j];
        }
        w[i] = (lead * first.cdf(times[i]) + q * h * acc) / implicit;
    }
    Ok(w)
}

/// Forward-marching trapezoidal solution of the defective renewal equation.
/// The per-point error is the Richardson estimate against the grid of twice
/// the step, plus the law bias.
pub fn solve_renewal_equation(
    first: &FirstPassageLaw,
    step: &FirstPassageLaw,
    f: &FundParams,
    grid: &TimeGrid,
) -> Result<CostCurve> {
    let q = step.laplace_at_r;
    if !(q < 1.0) {
        return Err(Error::invalid("laplace_at_r", "kernel must be defective"));
    }
    // density must integrate to the cdf
    let times = grid.times();
    let mass = {
        let d: Vec<f64> = times.iter().map(|&s| step.density(s)).collect();
        grid.step * (d.iter().sum::<f64>() - 0.5 * (d[0] + d[d.len() - 1]))
    };
    let target = step.cdf(grid.t_max()) - step.cdf(0.0);
    if (mass - target).abs() > 5e-3 + step.bias {
        return Err(Error::GridTooCoarse(format!(
            "density integrates to {mass:.6} but cdf rises by {target:.6} on the grid"
        )));
    }
    let fine = march(first, step, f, grid)?;
    let top = fine.iter().cloned().fold(0.0_f64, f64::max).max(1e-300);
    if fine.windows(2).any(|w| w[1] < w[0] - MONOTONE_SLACK * top) {
        return Err(Error::GridTooCoarse("marched cost decreases in t".into()));
    }
    let coarse = grid.coarsened().map(|cg| march(first, step, f, &cg)).transpose()?;
    let law_bias = (first.bias + step.bias) * f.theta / (1.0 - q);
    Ok(finish_curve(grid, fine, coarse, law_bias, Method::Renewal))
}

/// Least-squares fit of `ln(v - w(t))` on `[t_lo, t_hi]`; returns
/// `(slope, intercept)`. The slope estimates `-k`.
pub fn tail_decay_fit(curve: &CostCurve, perpetual: f64, t_lo: f64, t_hi: f64) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve
        .t
        .iter()
        .zip(&curve.w)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .filter_map(|(t, w)| {
            let gap = perpetual - w;
            (gap > 0.0).then(|| (*t, gap.ln()))
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::invalid("curve", "fewer than three points with w < v in the window"));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mt))
}

//! Seeded Euler-Maruyama simulation of the reserve, the regenerated reserve
//! and the asset-liability scheme.
//!
//! Path `i` draws its Gaussian increments from ChaCha8 stream `2i` and its
//! bridge uniforms from stream `2i + 1` of the master seed, so every path is
//! a pure function of `(seed, i)`. Aggregates are reduced in path order,
//! which makes results bit-identical for any worker count.

use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alm::AlmParams;
use crate::error::{Error, Result};
use crate::model::{positive, DiffusionSpec, FundParams};
use crate::renewal::{CostCurve, FirstPassageLaw, Method};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Longest simulated time per path.
    pub horizon: f64,
    /// A regenerative path stops once `e^{-rT}` drops below this.
    pub discount_cutoff: f64,
    /// Count intra-step crossings with the Brownian-bridge probability
    /// `exp(-2 x0 x1 / (σ² dt))`, σ frozen at the step start.
    pub bridge: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            n_paths: 10_000,
            seed: 0,
            horizon: 1_000.0,
            discount_cutoff: 1e-10,
            bridge: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be at least 1"));
        }
        if !(self.discount_cutoff > 0.0 && self.discount_cutoff < 1.0) {
            return Err(Error::invalid("discount_cutoff", "must lie in (0, 1)"));
        }
        if self.dt > self.horizon {
            return Err(Error::invalid("dt", "exceeds the horizon"));
        }
        Ok(())
    }

    fn max_steps(&self, until: f64) -> u64 {
        (until.min(self.horizon) / self.dt).ceil() as u64
    }
}

/// The settings that determine a run bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fingerprint {
    pub seed: u64,
    pub dt: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub discount_cutoff: f64,
    pub bridge: bool,
}

impl From<&SimConfig> for Fingerprint {
    fn from(c: &SimConfig) -> Self {
        Fingerprint {
            seed: c.seed,
            dt: c.dt,
            n_paths: c.n_paths,
            horizon: c.horizon,
            discount_cutoff: c.discount_cutoff,
            bridge: c.bridge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_paths)`.
    pub std_error: f64,
    pub n_paths: usize,
    /// Bound on the bias from stopping paths early (zero when not applicable).
    pub truncation_bound: f64,
    /// Paths that reached the horizon before finishing.
    pub censored: usize,
    pub fingerprint: Fingerprint,
}

impl Estimate {
    fn from_values(values: &[f64], cfg: &SimConfig, truncation_bound: f64, censored: usize) -> Self {
        let (mean, std_error) = mean_and_se(values);
        Estimate {
            mean,
            std_error,
            n_paths: values.len(),
            truncation_bound,
            censored,
            fingerprint: cfg.into(),
        }
    }

    /// `|mean - target| / std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_error
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

#[cfg(feature = "parallel")]
fn map_paths<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_paths<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

struct PathRng {
    noise: ChaCha8Rng,
    bridge: ChaCha8Rng,
}

impl PathRng {
    fn new(seed: u64, path: usize) -> Self {
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(2 * path as u64);
        let mut bridge = ChaCha8Rng::seed_from_u64(seed);
        bridge.set_stream(2 * path as u64 + 1);
        PathRng { noise, bridge }
    }

    #[inline]
    fn normal(&mut self) -> f64 {
        self.noise.sample(StandardNormal)
    }

    /// Bridge crossing test for a step from `x0 > 0` to `x1 > 0` with
    /// variance `var_dt`.
    #[inline]
    fn crossed_between(&mut self, x0: f64, x1: f64, var_dt: f64) -> bool {
        let e = 2.0 * x0 * x1 / var_dt;
        // exp(-40) is below the resolution of a uniform draw
        e < 40.0 && self.bridge.random::<f64>() < (-e).exp()
    }
}

/// One Euler-Maruyama step policy for a diffusion.
enum Stepper<'a> {
    Constant { drift_dt: f64, vol: f64, var_dt: f64 },
    General { spec: &'a DiffusionSpec, dt: f64, sqrt_dt: f64 },
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a DiffusionSpec, dt: f64) -> Self {
        match spec.constant_params() {
            Some((mu, sigma)) => Stepper::Constant {
                drift_dt: mu * dt,
                vol: sigma * dt.sqrt(),
                var_dt: sigma * sigma * dt,
            },
            None => Stepper::General {
                spec,
                dt,
                sqrt_dt: dt.sqrt(),
            },
        }
    }

    /// Next state, or `None` when the path reaches 0 during the step.
    #[inline]
    fn step(&self, x: f64, rng: &mut PathRng, bridge: bool) -> Option<f64> {
        let z = rng.normal();
        let (next, var_dt) = match *self {
            Stepper::Constant { drift_dt, vol, var_dt } => (x + drift_dt + vol * z, var_dt),
            Stepper::General { spec, dt, sqrt_dt } => {
                let s2 = spec.diffusion_sq(x).max(0.0);
                (x + spec.drift(x) * dt + s2.sqrt() * sqrt_dt * z, s2 * dt)
            }
        };
        if next <= 0.0 || (bridge && var_dt > 0.0 && rng.crossed_between(x, next, var_dt)) {
            None
        } else {
            Some(next)
        }
    }
}

/// Runs one regenerated path from `start`, restarting at `restart` after
/// each hit of 0, for at most `max_steps` steps. Calls `on_hit` with each
/// hit time; returns the number of steps taken.
fn regenerate(
    stepper: &Stepper,
    start: f64,
    restart: Option<f64>,
    max_steps: u64,
    dt: f64,
    bridge: bool,
    rng: &mut PathRng,
    mut on_hit: impl FnMut(f64),
) -> u64 {
    let mut x = start;
    let mut k = 0u64;
    while k < max_steps {
        k += 1;
        match stepper.step(x, rng, bridge) {
            Some(next) => x = next,
            None => {
                on_hit(k as f64 * dt);
                match restart {
                    Some(level) => x = level,
                    None => return k,
                }
            }
        }
    }
    k
}

/// First passage times from one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageSample {
    /// Observed passage times, in path order; censored paths are omitted.
    pub times: Vec<f64>,
    pub censored: usize,
    pub fingerprint: Fingerprint,
}

impl PassageSample {
    pub fn n_paths(&self) -> usize {
        self.times.len() + self.censored
    }

    /// Mean passage time over uncensored paths.
    pub fn mean_time(&self) -> Estimate {
        let cfg = self.config();
        Estimate::from_values(&self.times, &cfg, 0.0, self.censored)
    }

    /// `E[e^{-r S}]`, censored paths contributing 0; the truncation bound is
    /// the censored share times `e^{-r horizon}`.
    pub fn laplace(&self, r: f64) -> Estimate {
        let cfg = self.config();
        let mut vals: Vec<f64> = self.times.iter().map(|s| (-r * s).exp()).collect();
        vals.extend(std::iter::repeat_n(0.0, self.censored));
        let bound = self.censored as f64 / self.n_paths() as f64 * (-r * cfg.horizon).exp();
        Estimate::from_values(&vals, &cfg, bound, self.censored)
    }

    fn config(&self) -> SimConfig {
        let f = &self.fingerprint;
        SimConfig {
            dt: f.dt,
            n_paths: f.n_paths,
            seed: f.seed,
            horizon: f.horizon,
            discount_cutoff: f.discount_cutoff,
            bridge: f.bridge,
        }
    }
}

/// Simulates `S_a` with absorption at the first step ending at or below 0.
pub fn simulate_fpt(spec: &DiffusionSpec, a: f64, cfg: &SimConfig) -> Result<PassageSample> {
    positive("a", a)?;
    cfg.validate()?;
    let stepper = Stepper::new(spec, cfg.dt);
    let max_steps = cfg.max_steps(cfg.horizon);
    let out = map_paths(cfg.n_paths, |i| {
        let mut rng = PathRng::new(cfg.seed, i);
        let mut hit = None;
        regenerate(&stepper, a, None, max_steps, cfg.dt, cfg.bridge, &mut rng, |t| hit = Some(t));
        hit
    });
    let censored = out.iter().filter(|h| h.is_none()).count();
    Ok(PassageSample {
        times: out.into_iter().flatten().collect(),
        censored,
        fingerprint: cfg.into(),
    })
}

/// Hit times of the regenerated reserve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegenerativeSample {
    pub hits: Vec<Vec<f64>>,
    /// Time at which every path was stopped.
    pub stop_time: f64,
    pub fingerprint: Fingerprint,
}

impl RegenerativeSample {
    /// Gaps `D_n = T_n - T_{n-1}` of every path with `n` counted from 1.
    pub fn gaps(&self, n: usize) -> Vec<f64> {
        self.hits
            .iter()
            .filter(|h| h.len() >= n)
            .map(|h| if n == 1 { h[0] } else { h[n - 1] - h[n - 2] })
            .collect()
    }

    /// CSV dump with header `path,n,t`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "path,n,t")?;
        for (p, hits) in self.hits.iter().enumerate() {
            for (n, t) in hits.iter().enumerate() {
                writeln!(out, "{p},{},{t}", n + 1)?;
            }
        }
        Ok(())
    }
}

fn stop_time(f: &FundParams, cfg: &SimConfig) -> f64 {
    (-cfg.discount_cutoff.ln() / f.r).min(cfg.horizon)
}

/// Hit times `T_1 < T_2 < ...` of the reserve started at `a` and restarted
/// at `θ`, up to the earlier of the horizon and the discount cutoff time.
pub fn simulate_regenerative(spec: &DiffusionSpec, f: &FundParams, cfg: &SimConfig) -> Result<RegenerativeSample> {
    cfg.validate()?;
    let stop = stop_time(f, cfg);
    let stepper = Stepper::new(spec, cfg.dt);
    let max_steps = cfg.max_steps(stop);
    let hits = map_paths(cfg.n_paths, |i| {
        let mut rng = PathRng::new(cfg.seed, i);
        let mut h = Vec::new();
        regenerate(&stepper, f.a, Some(f.theta), max_steps, cfg.dt, cfg.bridge, &mut rng, |t| h.push(t));
        h
    });
    Ok(RegenerativeSample {
        hits,
        stop_time: stop,
        fingerprint: cfg.into(),
    })
}

/// Perpetual and finite-horizon estimates from one set of paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEstimates {
    pub perpetual: Estimate,
    /// `err` holds the standard error at each time.
    pub finite: CostCurve,
}

struct PathCosts {
    total: f64,
    upto: Vec<f64>,
    gap_discount: f64,
    gaps: u32,
}

fn check_grid(t_grid: &[f64], cfg: &SimConfig) -> Result<()> {
    if t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("t_grid", "times must be non-negative and sorted"));
    }
    if t_grid.last().is_some_and(|t| *t > cfg.horizon) {
        return Err(Error::invalid("t_grid", "extends past the simulation horizon"));
    }
    Ok(())
}

/// `V = Σ θ e^{-r T_n}` over all hits before the stop time, and
/// `W(t) = Σ_{T_n ≤ t} θ e^{-r T_n}` on `t_grid`.
pub fn estimate_costs(
    spec: &DiffusionSpec,
    f: &FundParams,
    t_grid: &[f64],
    cfg: &SimConfig,
) -> Result<CostEstimates> {
    cfg.validate()?;
    check_grid(t_grid, cfg)?;
    let t_last = t_grid.last().copied().unwrap_or(0.0);
    let stop = stop_time(f, cfg).max(t_last);
    let stepper = Stepper::new(spec, cfg.dt);
    let max_steps = cfg.max_steps(stop);
    let per_path = map_paths(cfg.n_paths, |i| {
        let mut rng = PathRng::new(cfg.seed, i);
        let mut c = PathCosts {
            total: 0.0,
            upto: vec![0.0; t_grid.len()],
            gap_discount: 0.0,
            gaps: 0,
        };
        let mut last: Option<f64> = None;
        let mut next_t = 0;
        regenerate(&stepper, f.a, Some(f.theta), max_steps, cfg.dt, cfg.bridge, &mut rng, |t| {
            while next_t < t_grid.len() && t_grid[next_t] < t {
                c.upto[next_t] = c.total;
                next_t += 1;
            }
            c.total += f.theta * (-f.r * t).exp();
            if let Some(prev) = last {
                c.gap_discount += (-f.r * (t - prev)).exp();
                c.gaps += 1;
            }
            last = Some(t);
        });
        for u in &mut c.upto[next_t..] {
            *u = c.total;
        }
        c
    });

    let (gap_sum, gap_n) = per_path
        .iter()
        .fold((0.0, 0u64), |(s, n), c| (s + c.gap_discount, n + c.gaps as u64));
    let phi_step = if gap_n > 0 { gap_sum / gap_n as f64 } else { 0.0 };
    let bound = f.theta * (-f.r * stop).exp() / (1.0 - phi_step.min(1.0 - 1e-12));
    let censored = if stop >= cfg.horizon { cfg.n_paths } else { 0 };
    let totals: Vec<f64> = per_path.iter().map(|c| c.total).collect();
    let perpetual = Estimate::from_values(&totals, cfg, bound, censored);

    let mut w = Vec::with_capacity(t_grid.len());
    let mut err = Vec::with_capacity(t_grid.len());
    let mut column = vec![0.0; per_path.len()];
    for j in 0..t_grid.len() {
        for (slot, c) in column.iter_mut().zip(&per_path) {
            *slot = c.upto[j];
        }
        let (m, se) = mean_and_se(&column);
        w.push(m);
        err.push(if se.is_finite() { se } else { 0.0 });
    }
    Ok(CostEstimates {
        perpetual,
        finite: CostCurve {
            t: t_grid.to_vec(),
            w,
            err,
            method: Method::MonteCarlo,
        },
    })
}

/// Estimate of the perpetual cost. The reported truncation bound is
/// `θ e^{-r T_stop} / (1 - φ̂_θ(r))` with `φ̂_θ` taken from the simulated gaps.
pub fn estimate_perpetual(spec: &DiffusionSpec, f: &FundParams, cfg: &SimConfig) -> Result<Estimate> {
    Ok(estimate_costs(spec, f, &[], cfg)?.perpetual)
}

/// Pointwise estimate of the expected cost up to each time in `t_grid`.
pub fn estimate_finite(spec: &DiffusionSpec, f: &FundParams, t_grid: &[f64], cfg: &SimConfig) -> Result<CostCurve> {
    check_grid(t_grid, cfg)?;
    let t_last = t_grid.last().copied().unwrap_or(0.0);
    // no need to run past the last grid time
    let short = SimConfig {
        discount_cutoff: cfg.discount_cutoff.max((-f.r * t_last).exp().min(0.5)),
        ..*cfg
    };
    let mut est = estimate_costs(spec, f, t_grid, &short)?;
    for e in &mut est.finite.err {
        *e = e.max(0.0);
    }
    Ok(est.finite)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlmScheme {
    /// Assets `A(t)` against the liability curve `L(t)` in currency units.
    Direct,
    /// The log funding ratio `Y(t)` with costs `b(e^θ - 1)e^{-(r-ρ)T}`.
    Reduced,
}

/// Discounted injection totals per path under the chosen scheme. Both
/// schemes consume the same noise, so paths can be compared one by one.
pub fn simulate_alm_paths(alm: &AlmParams, cfg: &SimConfig, scheme: AlmScheme) -> Result<Vec<f64>> {
    cfg.validate()?;
    let net = alm.net_rate();
    let stop = (-cfg.discount_cutoff.ln() / net).min(cfg.horizon);
    let max_steps = cfg.max_steps(stop);
    let dt = cfg.dt;
    let drift_dt = alm.mu * dt;
    let vol = alm.sigma * dt.sqrt();
    let var_dt = alm.sigma * alm.sigma * dt;
    let lift = alm.theta.exp();
    Ok(map_paths(cfg.n_paths, |i| {
        let mut rng = PathRng::new(cfg.seed, i);
        let mut total = 0.0;
        match scheme {
            AlmScheme::Reduced => {
                let spec = Stepper::Constant { drift_dt, vol, var_dt };
                let cost = alm.b * alm.theta.exp_m1();
                regenerate(&spec, alm.a, Some(alm.theta), max_steps, dt, cfg.bridge, &mut rng, |t| {
                    total += cost * (-net * t).exp();
                });
            }
            AlmScheme::Direct => {
                let growth = ((alm.rho + alm.mu) * dt).exp();
                let mut assets = alm.b * alm.a.exp();
                for k in 1..=max_steps {
                    let t = k as f64 * dt;
                    let liab = alm.b * (alm.rho * t).exp();
                    let prev_ratio = (assets / (alm.b * (alm.rho * (t - dt)).exp())).ln();
                    assets *= growth * (vol * rng.normal()).exp();
                    let ratio = (assets / liab).ln();
                    let hit = assets <= liab
                        || (cfg.bridge && rng.crossed_between(prev_ratio, ratio, var_dt));
                    if hit {
                        total += liab * (lift - 1.0) * (-alm.r * t).exp();
                        assets = liab * lift;
                    }
                }
            }
        }
        total
    }))
}

/// Estimate of the expected discounted injections of the asset-liability
/// scheme, simulated through the log funding ratio.
pub fn simulate_alm(alm: &AlmParams, cfg: &SimConfig) -> Result<Estimate> {
    let values = simulate_alm_paths(alm, cfg, AlmScheme::Reduced)?;
    let net = alm.net_rate();
    let stop = (-cfg.discount_cutoff.ln() / net).min(cfg.horizon);
    let phi = crate::brownian::fpt_laplace(&crate::alm::log_funding_ratio(alm).0, alm.theta, net)?;
    let bound = alm.b * alm.theta.exp_m1() * (-net * stop).exp() / (1.0 - phi);
    Ok(Estimate::from_values(&values, cfg, bound, 0))
}

/// DKW half-width at 95% confidence.
fn dkw_band(n: usize) -> f64 {
    ((2.0_f64 / 0.05).ln() / (2.0 * n as f64)).sqrt()
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^{-1/5}`; `sorted` is ascending.
fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let (mean, se) = mean_and_se(sorted);
    let sd = se * n.sqrt();
    let q = |p: f64| sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 && h.is_finite() {
        h
    } else {
        (mean.abs() * 1e-3).max(1e-9)
    }
}

/// Law of `S_level` estimated from simulated passage times: the empirical
/// cdf, a Gaussian kernel density reflected at 0, and `φ(r)` as the sample
/// mean of `e^{-rS}`. The law's `bias` is the 95% DKW band of the cdf.
pub fn empirical_passage_law(spec: &DiffusionSpec, level: f64, r: f64, cfg: &SimConfig) -> Result<FirstPassageLaw> {
    positive("r", r)?;
    let sample = simulate_fpt(spec, level, cfg)?;
    let n = sample.n_paths();
    if sample.times.len() < 2 {
        return Err(Error::invalid("n_paths", "too few passages to estimate a law"));
    }
    let phi = sample.laplace(r).mean;
    let mut sorted = sample.times.clone();
    sorted.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(&sorted);

    // binned kernel sum: bins of width h/8 hold sample counts
    let width = h / 8.0;
    let top = *sorted.last().unwrap();
    let mut bins = vec![0u32; (top / width) as usize + 1];
    let last_bin = bins.len() - 1;
    for s in &sorted {
        bins[((s / width) as usize).min(last_bin)] += 1;
    }
    let bins = Arc::new(bins);
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = move |s: f64| {
        if !(s >= 0.0) {
            return 0.0;
        }
        let reach = 6.0 * h;
        let lo = ((s - reach).max(0.0) / width) as usize;
        let hi = (((s + reach) / width) as usize + 1).min(bins.len());
        let mut acc = 0.0;
        for b in lo..hi {
            let c = bins[b];
            if c == 0 {
                continue;
            }
            let centre = (b as f64 + 0.5) * width;
            let u = (s - centre) / h;
            let v = (s + centre) / h;
            acc += c as f64 * ((-0.5 * u * u).exp() + (-0.5 * v * v).exp());
        }
        acc * norm
    };
    let sorted = Arc::new(sorted);
    let cdf = move |s: f64| sorted.partition_point(|t| *t <= s) as f64 / n as f64;
    let phi = phi.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    FirstPassageLaw::new(cdf, density, phi, dkw_band(n))
}

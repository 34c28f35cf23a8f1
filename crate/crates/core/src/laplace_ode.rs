//! First-passage Laplace transforms of a general diffusion, and the cost
//! quantities that follow from them.
//!
//! `u(x) = E[exp(-λ S_x)]` solves `½σ²(x)u'' + μ(x)u' = λu` with `u(0) = 1`
//! and `u(∞) = 0`. The half line is truncated at `X_max` (doubled until the
//! values on the probed range settle) and discretised with second-order
//! central differences on the graded grid `x = ℓ(exp(βξ) - 1)`, ξ uniform on
//! `[0, 1]`. Two resolutions are combined by Richardson extrapolation, and
//! resolution is doubled until successive extrapolations agree to `rel_tol`.
//!
//! For `λ < 0` the same problem selects the minimal positive solution as long
//! as one exists; past the edge of the transform's domain the truncated
//! solutions change sign or fail to settle, which is reported as `NoDecay`.

use serde::{Deserialize, Serialize};

use crate::brownian::AsymptoticCost;
use crate::error::{Error, Result};
use crate::model::{positive, DiffusionSpec, FundParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub initial_x_max: f64,
    /// Resolution doublings allowed per truncated domain.
    pub max_refinements: usize,
    pub max_domain_doublings: usize,
    pub initial_cells: usize,
    /// Step of the central difference in λ.
    pub lambda_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-10,
            initial_x_max: 16.0,
            max_refinements: 8,
            max_domain_doublings: 8,
            initial_cells: 256,
            lambda_step: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        positive("rel_tol", self.rel_tol)?;
        positive("initial_x_max", self.initial_x_max)?;
        positive("lambda_step", self.lambda_step)?;
        if self.max_refinements < 2 {
            return Err(Error::invalid("max_refinements", "must be at least 2"));
        }
        if self.initial_cells < 8 {
            return Err(Error::invalid("initial_cells", "must be at least 8"));
        }
        Ok(())
    }
}

/// Graded grid `x_i = ℓ(exp(β i/N) - 1)`, `x_N = X_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Grid {
    x_max: f64,
    scale: f64,
    beta: f64,
    cells: usize,
}

impl Grid {
    fn new(x_max: f64, scale: f64, cells: usize) -> Self {
        Grid {
            x_max,
            scale,
            beta: (x_max / scale).ln_1p(),
            cells,
        }
    }

    fn refined(&self) -> Self {
        Grid {
            cells: self.cells * 2,
            ..*self
        }
    }

    #[inline]
    fn step(&self) -> f64 {
        1.0 / self.cells as f64
    }

    #[inline]
    fn x(&self, i: usize) -> f64 {
        if i == self.cells {
            return self.x_max;
        }
        self.scale * (self.beta * i as f64 * self.step()).exp_m1()
    }

    /// `dx/dξ` at node `i`.
    #[inline]
    fn jacobian(&self, i: usize) -> f64 {
        self.scale * self.beta * (self.beta * i as f64 * self.step()).exp()
    }

    fn xi(&self, x: f64) -> f64 {
        (x / self.scale).ln_1p() / self.beta
    }
}

/// Discrete solve on one grid. `None` when a node has a non-positive
/// off-diagonal (cell Péclet number too large for the central scheme).
fn solve_discrete(spec: &DiffusionSpec, lambda: f64, grid: &Grid) -> Option<Vec<f64>> {
    let n = grid.cells;
    let d = grid.step();
    let mut u = vec![0.0; n + 1];
    u[0] = 1.0;
    // forward sweep of the Thomas algorithm on unknowns 1..n-1
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 1..n {
        let x = grid.x(i);
        let jac = grid.jacobian(i);
        let a = 0.5 * spec.diffusion_sq(x) / (jac * jac);
        let b = spec.drift(x) / jac - a * grid.beta;
        let lower = a / (d * d) - b / (2.0 * d);
        let upper = a / (d * d) + b / (2.0 * d);
        let diag = -2.0 * a / (d * d) - lambda;
        if !(lower > 0.0 && upper > 0.0) {
            return None;
        }
        let rhs = if i == 1 { -lower * u[0] } else { 0.0 };
        let (lo, prev_c, prev_d) = if i == 1 {
            (0.0, 0.0, 0.0)
        } else {
            (lower, c_prime[i - 1], d_prime[i - 1])
        };
        let denom = diag - lo * prev_c;
        c_prime[i] = upper / denom;
        d_prime[i] = (rhs - lo * prev_d) / denom;
    }
    // u[n] = 0
    u[n - 1] = d_prime[n - 1];
    for i in (1..n - 1).rev() {
        u[i] = d_prime[i] - c_prime[i] * u[i + 1];
    }
    Some(u)
}

/// Richardson-extrapolated values on one truncated domain.
struct Level {
    grid: Grid,
    values: Vec<f64>,
    fine: Vec<f64>,
    est_error: f64,
}

/// A level whose refinement stalls on round-off is accepted, with its
/// achieved accuracy as the error estimate, if that is within this factor
/// of the requested tolerance.
const ROUNDOFF_SLACK: f64 = 1e3;

fn solve_on_domain(
    spec: &DiffusionSpec,
    lambda: f64,
    x_max: f64,
    scale: f64,
    probe: f64,
    cfg: &SolverConfig,
) -> Result<Level> {
    let mut grid = Grid::new(x_max, scale, cfg.initial_cells);
    let mut coarse = solve_discrete(spec, lambda, &grid);
    let mut previous: Option<Vec<f64>> = None;
    let mut last_diff = f64::INFINITY;
    let mut best: Option<Level> = None;
    let mut rises = 0;
    for _ in 0..cfg.max_refinements {
        let fine_grid = grid.refined();
        let fine = solve_discrete(spec, lambda, &fine_grid);
        let (Some(c), Some(f)) = (coarse.as_ref(), fine.as_ref()) else {
            grid = fine_grid;
            coarse = fine;
            previous = None;
            continue;
        };
        let extrapolated: Vec<f64> = c
            .iter()
            .enumerate()
            .map(|(i, &uc)| (4.0 * f[2 * i] - uc) / 3.0)
            .collect();
        if extrapolated.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoDecay { lambda, x_max });
        }
        if let Some(prev) = previous.as_ref() {
            let mut diff = 0.0_f64;
            for (j, &p) in prev.iter().enumerate() {
                if grid.x(2 * j) > probe.max(grid.x(2)) {
                    break;
                }
                let now = extrapolated[2 * j];
                diff = diff.max((now - p).abs() / now.abs().max(f64::MIN_POSITIVE));
            }
            if diff <= cfg.rel_tol {
                return Ok(Level {
                    grid,
                    values: extrapolated,
                    fine: f.clone(),
                    est_error: diff,
                });
            }
            // round-off eventually outgrows the truncation error
            rises = if diff > last_diff { rises + 1 } else { 0 };
            last_diff = diff;
            if best.as_ref().is_none_or(|b| diff < b.est_error) {
                best = Some(Level {
                    grid,
                    values: extrapolated.clone(),
                    fine: f.clone(),
                    est_error: diff,
                });
            }
            if rises >= 2 {
                break;
            }
        }
        previous = Some(extrapolated);
        grid = fine_grid;
        coarse = fine;
    }
    match best {
        Some(b) if b.est_error <= ROUNDOFF_SLACK * cfg.rel_tol => Ok(b),
        _ => Err(Error::RefinementExhausted {
            cells: grid.cells,
            estimate: last_diff,
            tol: cfg.rel_tol,
        }),
    }
}

/// Solution of the truncated boundary-value problem.
#[derive(Debug, Clone, Serialize)]
pub struct TransformSolution {
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub x_max: f64,
    pub est_error: f64,
    #[serde(skip)]
    layout: GridLayout,
    #[serde(skip)]
    fine: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct GridLayout(Grid);

impl TransformSolution {
    /// `u(x)` by four-point Lagrange interpolation in the grid coordinate.
    pub fn value_at(&self, x: f64) -> f64 {
        let grid = &self.layout.0;
        if x <= 0.0 {
            return 1.0;
        }
        if x >= grid.x_max {
            return 0.0;
        }
        let s = grid.xi(x) * grid.cells as f64;
        let n = grid.cells;
        let base = (s.floor() as isize - 1).clamp(0, n as isize - 3) as usize;
        let t = s - base as f64;
        let mut acc = 0.0;
        for j in 0..4 {
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    w *= (t - m as f64) / (j as f64 - m as f64);
                }
            }
            acc += w * self.values[base + j];
        }
        acc
    }

    /// One-sided `u'(0)` (fourth-order stencil in the grid coordinate).
    pub fn slope_at_origin(&self) -> f64 {
        let grid = &self.layout.0;
        let v = &self.values;
        let du = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4])
            / (12.0 * grid.step());
        du / grid.jacobian(0)
    }

    /// Largest scaled residual of the difference equations solved on the
    /// finest grid, `|Lu| / (|½σ²u''| + |μu'| + |λu|)` over interior nodes.
    pub fn discrete_residual(&self, spec: &DiffusionSpec) -> f64 {
        let grid = self.layout.0.refined();
        let d = grid.step();
        let u = &self.fine;
        let mut worst = 0.0_f64;
        for i in 1..grid.cells {
            let x = grid.x(i);
            let jac = grid.jacobian(i);
            let a = 0.5 * spec.diffusion_sq(x) / (jac * jac);
            let b = spec.drift(x) / jac - a * grid.beta;
            let second = a * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (d * d);
            let first = b * (u[i + 1] - u[i - 1]) / (2.0 * d);
            let zero = self.lambda * u[i];
            let scale = second.abs() + first.abs() + zero.abs();
            if scale > 0.0 {
                worst = worst.max((second + first - zero).abs() / scale);
            }
        }
        worst
    }
}

fn probe_points(probe: f64) -> impl Iterator<Item = f64> {
    (1..=16).map(move |i| probe * i as f64 / 16.0)
}

fn solve_with_probe(
    spec: &DiffusionSpec,
    lambda: f64,
    probe: f64,
    cfg: &SolverConfig,
) -> Result<TransformSolution> {
    cfg.validate()?;
    if !lambda.is_finite() {
        return Err(Error::invalid("lambda", "must be finite"));
    }
    let mut x_max = cfg.initial_x_max.max(4.0 * probe);
    let scale = x_max / 4.0;
    let check_positive = |level: &Level| -> Result<()> {
        let half = level.grid.x_max / 2.0;
        for (i, v) in level.values.iter().enumerate() {
            if level.grid.x(i) > half {
                break;
            }
            if !(*v > 0.0) {
                return Err(Error::NoDecay {
                    lambda,
                    x_max: level.grid.x_max,
                });
            }
        }
        Ok(())
    };
    let wrap = |level: Level, est: f64| TransformSolution {
        lambda,
        grid: (0..=level.grid.cells).map(|i| level.grid.x(i)).collect(),
        values: level.values,
        x_max: level.grid.x_max,
        est_error: est,
        layout: GridLayout(level.grid),
        fine: level.fine,
    };
    // for λ < 0, loss of resolution accompanies the approach to the domain edge
    let solve = |x_max: f64| match solve_on_domain(spec, lambda, x_max, scale, probe, cfg) {
        Err(Error::RefinementExhausted { .. }) if lambda < 0.0 => {
            Err(Error::NoDecay { lambda, x_max })
        }
        other => other,
    };
    let mut current = solve(x_max)?;
    check_positive(&current)?;
    for _ in 0..cfg.max_domain_doublings {
        x_max *= 2.0;
        let next = solve(x_max)?;
        check_positive(&next)?;
        let before = wrap_values(&current);
        let after = wrap_values(&next);
        let mut diff = 0.0_f64;
        for x in probe_points(probe) {
            let (u1, u2) = (before.value_at(x), after.value_at(x));
            diff = diff.max((u2 - u1).abs() / u2.abs().max(f64::MIN_POSITIVE));
        }
        // changes below the discretization noise cannot be resolved
        let settled = cfg.rel_tol.max(2.0 * current.est_error.max(next.est_error));
        if diff <= settled {
            let est = next.est_error.max(diff);
            return Ok(wrap(next, est));
        }
        current = next;
    }
    Err(Error::NoDecay { lambda, x_max })
}

/// Interpolation-only view of a level.
fn wrap_values(level: &Level) -> TransformSolution {
    TransformSolution {
        lambda: 0.0,
        grid: Vec::new(),
        values: level.values.clone(),
        x_max: level.grid.x_max,
        est_error: level.est_error,
        layout: GridLayout(level.grid),
        fine: Vec::new(),
    }
}

/// Solves the transform problem at rate `lambda`, settling values on
/// `[0, initial_x_max / 4]`.
pub fn solve_transform(
    spec: &DiffusionSpec,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<TransformSolution> {
    solve_with_probe(spec, lambda, cfg.initial_x_max / 4.0, cfg)
}

/// `φ_a(λ) = E[exp(-λ S_a)]`.
pub fn transform_at(spec: &DiffusionSpec, a: f64, lambda: f64, cfg: &SolverConfig) -> Result<f64> {
    Ok(transform_with_error(spec, a, lambda, cfg)?.0)
}

fn transform_with_error(
    spec: &DiffusionSpec,
    a: f64,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<(f64, f64)> {
    if !(a >= 0.0) {
        return Err(Error::invalid("a", "must be non-negative"));
    }
    if a == 0.0 {
        return Ok((1.0, 0.0));
    }
    let sol = solve_with_probe(spec, lambda, a, cfg)?;
    let v = sol.value_at(a);
    Ok((v, sol.est_error * v.abs()))
}

/// Derivative in λ with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derivative {
    pub value: f64,
    pub est_error: f64,
}

/// `∂φ_a/∂λ` by a Richardson-extrapolated central difference; falls back to
/// a one-sided (forward) stencil when `λ - h` lies outside the domain.
pub fn transform_dlambda(
    spec: &DiffusionSpec,
    a: f64,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<Derivative> {
    let h = cfg.lambda_step;
    let phi = |l: f64| transform_with_error(spec, a, l, cfg);
    let central = |h: f64| -> Result<(f64, f64)> {
        let (up, e1) = phi(lambda + h)?;
        let (down, e2) = phi(lambda - h)?;
        Ok(((up - down) / (2.0 * h), (e1 + e2) / (2.0 * h)))
    };
    match (central(h), central(h / 2.0)) {
        (Ok((d1, _)), Ok((d2, noise))) => Ok(Derivative {
            value: (4.0 * d2 - d1) / 3.0,
            est_error: (d2 - d1).abs() / 3.0 + noise,
        }),
        (Err(Error::NoDecay { .. }), _) | (_, Err(Error::NoDecay { .. })) => {
            let (f0, e0) = phi(lambda)?;
            let forward = |h: f64| -> Result<(f64, f64)> {
                let (f1, e1) = phi(lambda + h)?;
                let (f2, e2) = phi(lambda + 2.0 * h)?;
                Ok(((-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h), (3.0 * e0 + 4.0 * e1 + e2) / (2.0 * h)))
            };
            let (d1, _) = forward(h)?;
            let (d2, noise) = forward(h / 2.0)?;
            Ok(Derivative {
                value: (4.0 * d2 - d1) / 3.0,
                est_error: (d2 - d1).abs() / 3.0 + noise,
            })
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// `E[S_a] = -∂φ_a/∂λ` at `λ = 0`.
pub fn expected_ruin_time(spec: &DiffusionSpec, a: f64, cfg: &SolverConfig) -> Result<f64> {
    positive("a", a)?;
    let d = transform_dlambda(spec, a, 0.0, cfg)?;
    Ok(-d.value)
}

/// `θφ_a(r)/(1 - φ_θ(r))` from a single transform solve at `λ = r`.
pub fn perpetual_cost_general(
    spec: &DiffusionSpec,
    f: &FundParams,
    cfg: &SolverConfig,
) -> Result<f64> {
    let sol = solve_with_probe(spec, f.r, f.a.max(f.theta), cfg)?;
    let phi_a = sol.value_at(f.a);
    let phi_theta = sol.value_at(f.theta);
    Ok(f.theta * phi_a / (1.0 - phi_theta))
}

/// Small-injection limit `u_r(a) / (-u_r'(0))`.
pub fn perpetual_cost_general_limit(
    spec: &DiffusionSpec,
    a: f64,
    r: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    positive("a", a)?;
    positive("r", r)?;
    let sol = solve_with_probe(spec, r, a, cfg)?;
    Ok(sol.value_at(a) / -sol.slope_at_origin())
}

/// Positive root `k` of `φ_θ(r) φ_θ(-k) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRoot {
    pub k: f64,
    pub residual: f64,
    /// Largest rate tried at which the transform was still finite.
    pub feasible_upper: f64,
}

const ROOT_MAX_ITER: usize = 200;
/// Relative width at which the edge of the transform domain is considered
/// located.
const EDGE_REL_WIDTH: f64 = 1e-7;

pub fn solve_decay_rate(
    spec: &DiffusionSpec,
    theta: f64,
    r: f64,
    cfg: &SolverConfig,
) -> Result<DecayRoot> {
    positive("theta", theta)?;
    positive("r", r)?;
    let phi_r = transform_at(spec, theta, r, cfg)?;
    let excess = |k: f64| -> Result<f64> { Ok(phi_r * transform_at(spec, theta, -k, cfg)? - 1.0) };

    // bracket: g(lo) < 0 ≤ g(hi)
    let mut lo = 0.0_f64;
    let mut g_lo = phi_r - 1.0;
    let mut hi = f64::NAN;
    let mut g_hi = f64::NAN;
    let mut infeasible = f64::INFINITY;
    let mut k = r;
    for _ in 0..64 {
        match excess(k) {
            Ok(g) if g >= 0.0 => {
                hi = k;
                g_hi = g;
                break;
            }
            Ok(g) => {
                lo = k;
                g_lo = g;
                if infeasible.is_finite() {
                    k = 0.5 * (lo + infeasible);
                } else {
                    k *= 2.0;
                }
            }
            Err(Error::NoDecay { .. }) | Err(Error::RefinementExhausted { .. }) => {
                infeasible = k;
                k = 0.5 * (lo + infeasible);
            }
            Err(e) => return Err(e),
        }
        if infeasible.is_finite() && infeasible - lo <= EDGE_REL_WIDTH * infeasible {
            return Err(Error::NoRoot(format!(
                "phi_theta(r) phi_theta(-k) - 1 stays below zero ({g_lo:.3e}) up to the edge \
                 of the transform domain near k = {lo:.6}"
            )));
        }
    }
    if hi.is_nan() {
        return Err(Error::NoRoot(format!(
            "no sign change found; last feasible k = {lo}"
        )));
    }

    // Illinois false position on [lo, hi]
    let mut side = 0i8;
    let mut root = hi;
    let mut g_root = g_hi;
    for _ in 0..ROOT_MAX_ITER {
        root = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(root > lo && root < hi) {
            root = 0.5 * (lo + hi);
        }
        g_root = excess(root)?;
        if g_root.abs() < 1e-13 || (hi - lo) < 1e-15 * hi {
            break;
        }
        if g_root < 0.0 {
            lo = root;
            g_lo = g_root;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = root;
            g_hi = g_root;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(DecayRoot {
        k: root,
        residual: g_root,
        feasible_upper: if infeasible.is_finite() { lo.max(hi) } else { hi },
    })
}

/// Coefficient `c` of the `c exp(-k t)` correction.
pub fn asymptotic_coefficient_general(
    spec: &DiffusionSpec,
    f: &FundParams,
    cfg: &SolverConfig,
) -> Result<f64> {
    let root = solve_decay_rate(spec, f.theta, f.r, cfg)?;
    coefficient_from_root(spec, f, root.k, cfg)
}

fn coefficient_from_root(
    spec: &DiffusionSpec,
    f: &FundParams,
    k: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let phi_a_r = transform_at(spec, f.a, f.r, cfg)?;
    let phi_a_k = transform_at(spec, f.a, -k, cfg)?;
    let phi_t_r = transform_at(spec, f.theta, f.r, cfg)?;
    let slope = transform_dlambda(spec, f.theta, -k, cfg)?;
    let denom = -k * phi_t_r * slope.value;
    if !(denom > 0.0) {
        return Err(Error::NoRoot(format!(
            "non-positive renewal mean {denom:e} at k = {k}"
        )));
    }
    Ok(f.theta * phi_a_r * phi_a_k / denom)
}

/// `v - c exp(-k t)` for a general diffusion.
pub fn finite_cost_asymptotic_general(
    spec: &DiffusionSpec,
    f: &FundParams,
    t: f64,
    cfg: &SolverConfig,
) -> Result<AsymptoticCost> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    let root = solve_decay_rate(spec, f.theta, f.r, cfg)?;
    let c = coefficient_from_root(spec, f, root.k, cfg)?;
    let v = perpetual_cost_general(spec, f, cfg)?;
    Ok(AsymptoticCost::assemble(t, v, c, root.k))
}

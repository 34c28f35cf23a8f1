use fundcost::brownian::{self, BrownianParams};
use fundcost::laplace_ode::{self, SolverConfig};
use fundcost::model::FundParams;
use fundcost::renewal::{self, FirstPassageLaw, TimeGrid};
use wasm_bindgen::prelude::*;

/// Upper bound on returned points, to keep the page responsive.
pub const MAX_POINTS: usize = 4096;
/// Upper bound on renewal grid cells.
pub const MAX_CELLS: usize = 100_000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn check_points(points: usize) -> Result<(), String> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(())
    } else {
        Err(format!("points must be in 2..={MAX_POINTS}"))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }
}

pub fn perpetual_curve(
    mu: f64,
    sigma: f64,
    theta: f64,
    r: f64,
    a_max: f64,
    points: usize,
) -> Result<Curve, String> {
    check_points(points)?;
    let p = BrownianParams::new(mu, sigma).map_err(err)?;
    if !(a_max > 0.0 && a_max.is_finite()) {
        return Err("a_max must be positive".into());
    }
    let x = linspace(0.0, a_max, points);
    let y = x
        .iter()
        .map(|&a| {
            let f = FundParams::new(a.max(f64::MIN_POSITIVE), theta, r).map_err(err)?;
            Ok(brownian::perpetual_cost(&p, &f))
        })
        .collect::<Result<_, String>>()?;
    Ok(Curve { x, y })
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteCurves {
    t: Vec<f64>,
    renewal: Vec<f64>,
    renewal_err: Vec<f64>,
    asymptotic: Vec<f64>,
    perpetual: f64,
    decay_rate: f64,
}

#[wasm_bindgen]
impl FiniteCurves {
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn renewal(&self) -> Vec<f64> {
        self.renewal.clone()
    }

    #[wasm_bindgen(getter, js_name = renewalErr)]
    pub fn renewal_err(&self) -> Vec<f64> {
        self.renewal_err.clone()
    }

    /// Empty when no decay rate exists for the parameters.
    #[wasm_bindgen(getter)]
    pub fn asymptotic(&self) -> Vec<f64> {
        self.asymptotic.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn perpetual(&self) -> f64 {
        self.perpetual
    }

    /// `NaN` when no decay rate exists.
    #[wasm_bindgen(getter, js_name = decayRate)]
    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }
}

pub fn finite_curves(
    mu: f64,
    sigma: f64,
    a: f64,
    theta: f64,
    r: f64,
    t_max: f64,
    step: f64,
) -> Result<FiniteCurves, String> {
    let p = BrownianParams::new(mu, sigma).map_err(err)?;
    let f = FundParams::new(a, theta, r).map_err(err)?;
    let grid = TimeGrid::new(t_max, step).map_err(err)?;
    if grid.cells > MAX_CELLS {
        return Err(format!("at most {MAX_CELLS} grid cells; increase the step"));
    }
    let first = FirstPassageLaw::brownian(&p, f.a, f.r).map_err(err)?;
    let kernel = FirstPassageLaw::brownian(&p, f.theta, f.r).map_err(err)?;
    let curve = renewal::solve_renewal_equation(&first, &kernel, &f, &grid).map_err(err)?;
    let (asymptotic, decay_rate) = match brownian::decay_rate(&p, f.theta, f.r) {
        Ok(k) => {
            let w = curve
                .t
                .iter()
                .map(|&t| brownian::finite_cost_approx(&p, &f, t).map(|c| c.value))
                .collect::<fundcost::Result<_>>()
                .map_err(err)?;
            (w, k)
        }
        Err(_) => (Vec::new(), f64::NAN),
    };
    Ok(FiniteCurves {
        t: curve.t,
        renewal: curve.w,
        renewal_err: curve.err,
        asymptotic,
        perpetual: brownian::perpetual_cost(&p, &f),
        decay_rate,
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct TransformProfile {
    x: Vec<f64>,
    numerical: Vec<f64>,
    exact: Vec<f64>,
    est_error: f64,
}

#[wasm_bindgen]
impl TransformProfile {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn numerical(&self) -> Vec<f64> {
        self.numerical.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    /// Solver's own relative error estimate.
    #[wasm_bindgen(getter, js_name = estError)]
    pub fn est_error(&self) -> f64 {
        self.est_error
    }
}

pub fn transform_profile(
    mu: f64,
    sigma: f64,
    lambda: f64,
    x_max: f64,
    points: usize,
) -> Result<TransformProfile, String> {
    check_points(points)?;
    let p = BrownianParams::new(mu, sigma).map_err(err)?;
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err("x_max must be positive".into());
    }
    let cfg = SolverConfig {
        rel_tol: 1e-8,
        initial_x_max: (4.0 * x_max).max(SolverConfig::default().initial_x_max),
        ..SolverConfig::default()
    };
    let sol = laplace_ode::solve_transform(&p.to_spec(), lambda, &cfg).map_err(err)?;
    let x = linspace(0.0, x_max, points);
    let numerical = x.iter().map(|&s| sol.value_at(s)).collect();
    let exact = x
        .iter()
        .map(|&s| brownian::fpt_laplace(&p, s, lambda).unwrap_or(if s == 0.0 { 1.0 } else { f64::NAN }))
        .collect();
    Ok(TransformProfile {
        x,
        numerical,
        exact,
        est_error: sol.est_error,
    })
}

impl Curve {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }
}

impl FiniteCurves {
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, Option<f64>)> + '_ {
        (0..self.t.len()).map(|i| (self.t[i], self.renewal[i], self.asymptotic.get(i).copied()))
    }
}

impl TransformProfile {
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.x.len()).map(|i| (self.x[i], self.numerical[i], self.exact[i]))
    }
}

//! WebAssembly bindings for the interactive demo in `www/`.
//!
//! Every export has a plain Rust counterpart in [`api`] so the numerics can
//! be tested natively; the wrappers only convert errors to `JsError`.

use wasm_bindgen::prelude::*;

pub mod api;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Perpetual cost over `points` evenly spaced starting reserves in `[0, a_max]`.
#[wasm_bindgen(js_name = perpetualCurve)]
pub fn perpetual_curve(
    mu: f64,
    sigma: f64,
    theta: f64,
    r: f64,
    a_max: f64,
    points: usize,
) -> Result<api::Curve, JsError> {
    api::perpetual_curve(mu, sigma, theta, r, a_max, points).map_err(js)
}

/// Finite-horizon cost from the renewal equation and the large-time expansion.
#[wasm_bindgen(js_name = finiteCurves)]
pub fn finite_curves(
    mu: f64,
    sigma: f64,
    a: f64,
    theta: f64,
    r: f64,
    t_max: f64,
    step: f64,
) -> Result<api::FiniteCurves, JsError> {
    api::finite_curves(mu, sigma, a, theta, r, t_max, step).map_err(js)
}

/// Numerical transform profile `x -> E[exp(-lambda S_x)]` against the exact one.
#[wasm_bindgen(js_name = transformProfile)]
pub fn transform_profile(
    mu: f64,
    sigma: f64,
    lambda: f64,
    x_max: f64,
    points: usize,
) -> Result<api::TransformProfile, JsError> {
    api::transform_profile(mu, sigma, lambda, x_max, points).map_err(js)
}

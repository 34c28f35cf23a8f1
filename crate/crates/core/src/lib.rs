pub mod alm;
pub mod brownian;
pub mod error;
pub mod expr;
pub mod laplace_ode;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod renewal;

pub use error::{Error, Result};

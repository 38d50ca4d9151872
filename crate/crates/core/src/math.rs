//! Float helpers routed through `libm` so the crate stays `no_std`.

pub use libm::{atan2, cos, exp, fabs, log, log10, pow, sin, sqrt, tanh};

pub const PI: f64 = core::f64::consts::PI;
pub const TAU: f64 = core::f64::consts::TAU;

#[inline]
pub fn sq(x: f64) -> f64 {
    x * x
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

//! One-dimensional adaptive quadrature, L1 distances and the smoothed density.

mod adaptive;
mod smoothing;

pub use adaptive::{
    integrate, integrate_abs, integrate_abs_fallible, integrate_fallible, integrate_line, l1_distance,
    sign_changes, truncation_radius, Integral, QuadratureSpec, Truncation, DEFAULT_SCAN,
};
pub use smoothing::{bias_l1, smooth, smooth_direct, smoothing_radius};

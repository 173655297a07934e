//! Relaxed per-pixel negative log-Poisson likelihood.
//!
//! Above the barrier `l` this is `y - k ln y`. Below it the logarithm is
//! replaced by its tangent at `l` and a quadratic `(l - y)² / (2l)` is added.
//! The result is convex and C¹ everywhere, accepts negative `y`, and for
//! `k = 0` has its minimum exactly at `y = 0`.

use crate::error::{invalid, Result};

/// Value and derivative of the relaxed term. `l` must be positive.
pub fn rho_l(y: f64, k: f64, l: f64) -> Result<(f64, f64)> {
    if !(l > 0.0) || !l.is_finite() {
        return invalid(format!("barrier width must be positive, got {l}"));
    }
    Ok((rho_value(y, k, l), rho_derivative(y, k, l)))
}

#[inline]
pub(crate) fn rho_value(y: f64, k: f64, l: f64) -> f64 {
    if y >= l {
        if k == 0.0 {
            y
        } else {
            y - k * y.ln()
        }
    } else {
        let below = l - y;
        let linear = if k == 0.0 { y } else { y - k * (l.ln() - below / l) };
        linear + below * below / (2.0 * l)
    }
}

#[inline]
pub(crate) fn rho_derivative(y: f64, k: f64, l: f64) -> f64 {
    if y >= l {
        1.0 - k / y
    } else {
        1.0 - k / l - (l - y) / l
    }
}

/// `rho(y0 + step) - rho(y0)` evaluated without forming both values when
/// they are close, so small steps keep their precision.
#[inline]
fn log_branch_change(y0: f64, step: f64, k: f64) -> f64 {
    if k == 0.0 {
        step
    } else {
        step - k * (step / y0).ln_1p()
    }
}

#[inline]
fn relaxed_branch_change(y0: f64, step: f64, k: f64, l: f64) -> f64 {
    let y1 = y0 + step;
    step * (1.0 - k / l) - step * ((l - y0) + (l - y1)) / (2.0 * l)
}

/// `rho(y0 + step) - rho(y0)` evaluated without forming both values, so
/// small steps keep their precision.
#[inline]
pub(crate) fn rho_change(y0: f64, step: f64, k: f64, l: f64) -> f64 {
    let y1 = y0 + step;
    match (y0 >= l, y1 >= l) {
        (true, true) => log_branch_change(y0, step, k),
        (false, false) => relaxed_branch_change(y0, step, k, l),
        // crossing the barrier: split the change at `l`
        (true, false) => log_branch_change(y0, l - y0, k) + relaxed_branch_change(l, y1 - l, k, l),
        (false, true) => relaxed_branch_change(y0, l - y0, k, l) + log_branch_change(l, y1 - l, k),
    }
}

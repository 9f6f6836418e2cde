//! Connectivity that maximizes the sensitivity at fixed `beta`.

use super::{check_nonneg, sensitivity_derivative, AnalyticsError, Result};

pub const ALPHA_M_TOL: f64 = 1e-12;
pub const ALPHA_M_MAX_ITER: usize = 200;
pub const ALPHA_M_BRACKET_LOW: f64 = 1e-9;

/// Optimal connectivity `alpha_m(beta)`.
///
/// Zero for `beta >= 1/2` and one at `beta = 0`, where the sensitivity
/// blows up at the critical point instead of peaking. Otherwise the unique
/// zero in `(0, 1)` of the numerator `f` of `d sigma / d alpha`, found by
/// bisection on `[1e-9, 1]`.
/// The sign of `f` is read off [`sensitivity_derivative`], which shares it
/// (the denominator `2 alpha^2 Delta^{3/2}` is positive) and, unlike `f`
/// itself, is not dominated by rounding near `alpha = 0`.
pub fn alpha_m(beta: f64) -> Result<f64> {
    check_nonneg("beta", beta)?;
    if beta >= 0.5 {
        return Ok(0.0);
    }
    if beta == 0.0 {
        return Ok(1.0);
    }
    let sign = |alpha: f64| sensitivity_derivative(alpha, beta).map(|g| g > 0.0);

    let (mut low, mut high) = (ALPHA_M_BRACKET_LOW, 1.0);
    if !sign(low)? {
        // beta just below 1/2: the maximum has merged into alpha = 0.
        return Ok(0.0);
    }
    if sign(high)? {
        return Err(AnalyticsError::BracketFailure { beta, low, high });
    }
    for _ in 0..ALPHA_M_MAX_ITER {
        let mid = 0.5 * (low + high);
        if sign(mid)? {
            low = mid;
        } else {
            high = mid;
        }
        if high - low <= ALPHA_M_TOL {
            break;
        }
    }
    Ok(0.5 * (low + high))
}

//! Closed-form stationary quantities of the mean-field network.
//!
//! Every formula here is expressed either in the physical coordinates
//! `(mu, alpha, delta)` or in the reduced coordinates `(alpha, beta)` with
//! `beta = mu * delta`. The sensitivity and everything derived from it only
//! depend on the reduced pair.
//!
//! All functions are pure and cheap; sweeps can call them from any thread.

mod optimum;
mod polynomials;

pub use optimum::{alpha_m, ALPHA_M_BRACKET_LOW, ALPHA_M_MAX_ITER, ALPHA_M_TOL};
pub use polynomials::{
    conjugate_f, cubic_p, dbeta_conjugate_product, df_dbeta, numerator_f, proof_polynomials, quadratic_q, ProofPolynomials,
    ALPHA0, BETA0,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this connectivity the derivative of the sensitivity is replaced by
/// its `alpha -> 0` limit.
pub const SMALL_ALPHA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
    #[error("Divergent: activity is unbounded for delta = 0 and alpha = {alpha} >= 1")]
    Divergent { alpha: f64 },
    #[error("BracketFailure: no sign change of the sensitivity derivative on [{low}, {high}] at beta = {beta}")]
    BracketFailure { beta: f64, low: f64, high: f64 },
}

impl AnalyticsError {
    /// Short variant name, used by the CLI diagnostics and the C status codes.
    pub fn name(&self) -> &'static str {
        match self {
            AnalyticsError::InvalidParams(_) => "InvalidParams",
            AnalyticsError::Divergent { .. } => "Divergent",
            AnalyticsError::BracketFailure { .. } => "BracketFailure",
        }
    }
}

pub type Result<T> = std::result::Result<T, AnalyticsError>;

/// Spontaneous rate `mu`, mean connectivity `alpha` and refractory period
/// `delta` of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl ModelParams {
    /// Critical connectivity of the `delta = 0` network.
    pub const ALPHA_C: f64 = 1.0;

    pub fn new(mu: f64, alpha: f64, delta: f64) -> Result<Self> {
        let params = ModelParams { mu, alpha, delta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("mu", self.mu)?;
        check_nonneg("alpha", self.alpha)?;
        check_nonneg("delta", self.delta)
    }

    /// The dimensionless product `mu * delta`.
    pub fn beta(&self) -> f64 {
        self.mu * self.delta
    }
}

pub(crate) fn check_nonneg(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidParams(format!(
            "{name} must be finite and >= 0, got {value}"
        )))
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidParams(format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}

/// `(1 + beta - alpha)^2 + 4 alpha beta`. Sum of squares, so no cancellation.
pub fn discriminant(alpha: f64, beta: f64) -> f64 {
    let d = 1.0 + beta - alpha;
    d * d + 4.0 * alpha * beta
}

/// The same quantity written as `(1 + beta + alpha)^2 - 4 alpha`.
pub fn discriminant_alt(alpha: f64, beta: f64) -> f64 {
    let s = 1.0 + beta + alpha;
    s * s - 4.0 * alpha
}

/// Steady activity `a_inf(mu, alpha, delta)`.
///
/// The `delta > 0, alpha > 0` branch is evaluated as
/// `(1/delta) * (1 - 2/c)` with `c = 1 + alpha + beta + sqrt(Delta)`, i.e. the
/// textbook expression multiplied through by its conjugate, which stays
/// accurate as `alpha -> 0`. For `alpha < 1` the difference `c - 2` is further
/// rationalized to `beta * (1 + (2 + 2 alpha + beta)/(sqrt(Delta) + 1 - alpha))`
/// so that the `delta -> 0` limit `mu/(1 - alpha)` is also reached without
/// cancellation. At `mu = 0` the returned value is the `mu -> 0` limit.
pub fn steady_activity(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let ModelParams { mu, alpha, delta } = *params;
    if delta == 0.0 {
        if alpha >= ModelParams::ALPHA_C {
            return Err(AnalyticsError::Divergent { alpha });
        }
        return Ok(mu / (1.0 - alpha));
    }
    if alpha == 0.0 {
        // 1 / (delta + 1/mu), written to be exact at mu = 0.
        return Ok(mu / (1.0 + mu * delta));
    }
    let beta = params.beta();
    let root = discriminant(alpha, beta).sqrt();
    let c = 1.0 + alpha + beta + root;
    if alpha < 1.0 {
        let excess = 1.0 + (2.0 + 2.0 * alpha + beta) / (root + 1.0 - alpha);
        Ok(mu * excess / c)
    } else {
        Ok((beta + (alpha - 1.0) + root) / (c * delta))
    }
}

/// `(1/delta) * (1 - 2/(1 + alpha + beta + sqrt(Delta)))`, the conjugate form
/// without the small-`beta` rationalization.
pub fn steady_activity_conjugate(params: &ModelParams) -> f64 {
    let ModelParams { mu, alpha, delta } = *params;
    let beta = mu * delta;
    (1.0 - 2.0 / (1.0 + alpha + beta + discriminant(alpha, beta).sqrt())) / delta
}

/// Third line of the closed form, as printed. Cancels badly for small alpha;
/// kept for cross-checking [`steady_activity`].
pub fn steady_activity_textbook(params: &ModelParams) -> f64 {
    let ModelParams { mu, alpha, delta } = *params;
    let beta = mu * delta;
    1.0 / delta - (1.0 + alpha + beta - discriminant(alpha, beta).sqrt()) / (2.0 * alpha * delta)
}

/// Stationary solution: activity, interaction value and age density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryState {
    pub params: ModelParams,
    pub a_inf: f64,
    pub x_inf: f64,
}

impl StationaryState {
    /// Firing rate of a neuron out of its refractory period.
    pub fn hazard(&self) -> f64 {
        self.params.mu + self.x_inf
    }

    /// `u_inf(s) = a_inf * exp(-(mu + x_inf) * max(s - delta, 0))`.
    pub fn density(&self, s: f64) -> f64 {
        let excess = (s - self.params.delta).max(0.0);
        self.a_inf * (-self.hazard() * excess).exp()
    }

    /// Probability mass of `u_inf` on `[s0, s1]` (`s1` may be infinite).
    pub fn mass_between(&self, s0: f64, s1: f64) -> f64 {
        let (s0, s1) = (s0.max(0.0), s1.max(0.0));
        if s1 <= s0 {
            return 0.0;
        }
        let delta = self.params.delta;
        let r = self.hazard();
        let flat = (s1.min(delta) - s0).max(0.0) * self.a_inf;
        let (e0, e1) = (s0.max(delta) - delta, s1.max(delta) - delta);
        let decaying = if e1 <= e0 {
            0.0
        } else if r == 0.0 {
            self.a_inf * (e1 - e0)
        } else {
            // a/r * (exp(-r e0) - exp(-r e1)) = a/r * exp(-r e0) * (1 - exp(-r (e1 - e0)))
            self.a_inf / r * (-r * e0).exp() * (-(-r * (e1 - e0)).exp_m1())
        };
        flat + decaying
    }

    /// `a_inf * (delta + 1/(mu + x_inf))`; equals one at the fixed point.
    pub fn total_mass(&self) -> f64 {
        self.mass_between(0.0, f64::INFINITY)
    }

    /// Relative residual of `1 = a_inf * (delta + 1/(mu + x_inf))`.
    pub fn self_consistency_residual(&self) -> f64 {
        (1.0 - self.a_inf * (self.params.delta + 1.0 / self.hazard())).abs()
    }
}

pub fn stationary_state(params: &ModelParams) -> Result<StationaryState> {
    let a_inf = steady_activity(params)?;
    Ok(StationaryState {
        params: *params,
        a_inf,
        x_inf: params.alpha * a_inf,
    })
}

/// Sensitivity `d a_inf / d mu` in reduced coordinates.
///
/// Evaluated as `2 / (sqrt(Delta) * (1 + beta + alpha + sqrt(Delta)))`, an
/// equivalent form of `-1/(2 alpha) + (1 + beta + alpha)/(2 alpha sqrt(Delta))`
/// that is finite at `alpha = 0` (where it equals `1/(1 + beta)^2`). At
/// `beta = 0` it reproduces the limits `1/(1 - alpha)` and `1/(alpha (alpha - 1))`
/// and is `+inf` at `alpha = 1`.
pub fn sensitivity_reduced(alpha: f64, beta: f64) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    check_nonneg("beta", beta)?;
    let root = discriminant(alpha, beta).sqrt();
    Ok(2.0 / (root * (1.0 + beta + alpha + root)))
}

/// Sensitivity as printed, valid for `alpha > 0`.
pub fn sensitivity_textbook(alpha: f64, beta: f64) -> f64 {
    -1.0 / (2.0 * alpha) + (1.0 + beta + alpha) / (2.0 * alpha * discriminant(alpha, beta).sqrt())
}

/// Sensitivity `sigma(mu, alpha, delta)`.
pub fn sensitivity(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if params.delta == 0.0 && params.alpha >= ModelParams::ALPHA_C {
        return Err(AnalyticsError::Divergent {
            alpha: params.alpha,
        });
    }
    sensitivity_reduced(params.alpha, params.beta())
}

/// `g(alpha, beta) = d sigma / d alpha`.
///
/// For `alpha <= 1e-8` this is the limit `(1 - 2 beta)/(1 + beta)^4`.
/// Otherwise the derivative of the conjugate form of the sensitivity is used:
/// with `D = sqrt(Delta)`, `c = 1 + beta + alpha`, `k = alpha + beta - 1`,
/// `g = -2 (k c / D + D + 2 k) / (D (c + D))^2`. It has the same value as the
/// quotient `f / (2 alpha^2 Delta^{3/2})` without the `O(alpha^2)`
/// cancellation in `f`.
pub fn sensitivity_derivative(alpha: f64, beta: f64) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    check_nonneg("beta", beta)?;
    if alpha <= SMALL_ALPHA {
        return Ok((1.0 - 2.0 * beta) / (1.0 + beta).powi(4));
    }
    let root = discriminant(alpha, beta).sqrt();
    let c = 1.0 + beta + alpha;
    let k = alpha + beta - 1.0;
    let outer = root * (c + root);
    Ok(-2.0 * (k * c / root + root + 2.0 * k) / (outer * outer))
}

/// `(lim_{mu->0} a_inf, lim_{mu->inf} a_inf)` at fixed `alpha` and `delta`.
pub fn activity_limits(alpha: f64, delta: f64) -> Result<(f64, f64)> {
    check_nonneg("alpha", alpha)?;
    check_positive("delta", delta)?;
    let low = if alpha == 0.0 {
        0.0
    } else {
        ((alpha - 1.0) / (alpha * delta)).max(0.0)
    };
    Ok((low, 1.0 / delta))
}

/// Leading square-root term `sqrt(mu / delta)` of `a_inf` at `alpha = 1`.
pub fn critical_taylor(mu: f64, delta: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    check_positive("delta", delta)?;
    Ok((mu / delta).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(mu: f64, alpha: f64, delta: f64) -> ModelParams {
        ModelParams::new(mu, alpha, delta).unwrap()
    }

    /// Iterates `a -> 1/(delta + 1/(mu + alpha a))`, independent of the closed form.
    fn fixed_point(mu: f64, alpha: f64, delta: f64) -> f64 {
        let mut a = 0.0;
        for _ in 0..1_000_000 {
            let next = 1.0 / (delta + 1.0 / (mu + alpha * a));
            if (next - a).abs() <= 1e-15 * next {
                return next;
            }
            a = next;
        }
        a
    }

    #[test]
    fn steady_activity_branches() {
        assert_eq!(steady_activity(&p(1.0, 0.5, 0.0)).unwrap(), 2.0);
        assert_relative_eq!(
            steady_activity(&p(2.0, 0.0, 0.005)).unwrap(),
            1.0 / (0.005 + 0.5),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            steady_activity(&p(2.0, 0.0, 0.005)).unwrap(),
            1.980198019801980,
            max_relative = 1e-13
        );
    }

    #[test]
    fn steady_activity_matches_fixed_point_iteration() {
        let oracle = fixed_point(2.0, 1.0, 0.005);
        // frozen from the iteration
        assert_relative_eq!(oracle, 19.02498439450078, max_relative = 1e-12);
        assert_relative_eq!(
            steady_activity(&p(2.0, 1.0, 0.005)).unwrap(),
            oracle,
            max_relative = 1e-12
        );
        for &(mu, alpha, delta) in &[(0.3, 0.2, 0.01), (5.0, 0.9, 0.002), (50.0, 1.7, 0.005)] {
            assert_relative_eq!(
                steady_activity(&p(mu, alpha, delta)).unwrap(),
                fixed_point(mu, alpha, delta),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn saturation_at_large_mu() {
        let a = steady_activity(&p(1e9, 0.5, 0.005)).unwrap();
        assert!(a < 200.0);
        assert_relative_eq!(a, 200.0, max_relative = 1e-6);
    }

    #[test]
    fn divergent_and_invalid() {
        assert!(matches!(
            steady_activity(&ModelParams { mu: 1.0, alpha: 1.0, delta: 0.0 }),
            Err(AnalyticsError::Divergent { .. })
        ));
        assert!(matches!(
            steady_activity(&ModelParams { mu: 1.0, alpha: 3.0, delta: 0.0 }),
            Err(AnalyticsError::Divergent { .. })
        ));
        assert!(matches!(
            ModelParams::new(-1.0, 0.5, 0.1),
            Err(AnalyticsError::InvalidParams(_))
        ));
        assert!(ModelParams::new(1.0, f64::NAN, 0.1).is_err());
        assert!(sensitivity(&ModelParams { mu: 1.0, alpha: 1.0, delta: 0.0 }).is_err());
    }

    #[test]
    fn branches_are_continuous() {
        let (mu, delta) = (2.0, 0.005);
        let a0 = steady_activity(&p(mu, 0.0, delta)).unwrap();
        let a_eps = steady_activity(&p(mu, 1e-12, delta)).unwrap();
        assert_relative_eq!(a0, a_eps, max_relative = 1e-10);

        let d0 = steady_activity(&p(mu, 0.5, 0.0)).unwrap();
        let d_eps = steady_activity(&p(mu, 0.5, 1e-13)).unwrap();
        assert_relative_eq!(d0, d_eps, max_relative = 1e-9);
    }

    #[test]
    fn stable_form_matches_textbook() {
        for &(mu, alpha, delta) in &[(2.0, 1.0, 0.005), (0.1, 2.0, 0.005), (30.0, 0.7, 0.01), (1.0, 0.05, 0.3)] {
            let params = p(mu, alpha, delta);
            assert_relative_eq!(
                steady_activity(&params).unwrap(),
                steady_activity_textbook(&params),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                steady_activity_conjugate(&params),
                steady_activity_textbook(&params),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn stationary_state_closure() {
        let s = stationary_state(&p(1.0, 0.5, 0.0)).unwrap();
        assert_eq!(s.x_inf, 1.0);

        let s = stationary_state(&p(2.0, 0.0, 0.005)).unwrap();
        assert_relative_eq!(s.total_mass(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.density(0.001), 1.980198019801980, max_relative = 1e-13);
        assert_relative_eq!(
            s.density(1.005),
            1.980198019801980 * (-2.0f64).exp(),
            max_relative = 1e-12
        );

        let s = stationary_state(&p(2.0, 1.0, 0.005)).unwrap();
        assert!(s.self_consistency_residual() < 1e-12);
        assert!((s.total_mass() - 1.0).abs() < 1e-10);
        assert_eq!(s.x_inf, 1.0 * s.a_inf);
    }

    #[test]
    fn mass_between_is_additive() {
        let s = stationary_state(&p(3.0, 0.4, 0.01)).unwrap();
        let whole = s.mass_between(0.0, 2.0);
        let split = s.mass_between(0.0, 0.004) + s.mass_between(0.004, 0.013) + s.mass_between(0.013, 2.0);
        assert_relative_eq!(whole, split, max_relative = 1e-13);
    }

    #[test]
    fn sensitivity_limits_at_zero_beta() {
        assert_relative_eq!(sensitivity_reduced(0.5, 0.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sensitivity_reduced(2.0, 0.0).unwrap(), 0.5, max_relative = 1e-14);
        assert_eq!(sensitivity_reduced(1.0, 0.0).unwrap(), f64::INFINITY);
        // alpha = 0 extension
        assert_relative_eq!(
            sensitivity_reduced(0.0, 0.3).unwrap(),
            1.0 / (1.3f64 * 1.3),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            sensitivity_textbook(1e-6, 0.3),
            sensitivity_reduced(0.0, 0.3).unwrap(),
            max_relative = 1e-5
        );
    }

    #[test]
    fn sensitivity_matches_finite_difference() {
        let params = p(2.0, 1.0, 0.005);
        let h = 1e-6;
        let fd = (steady_activity(&p(2.0 + h, 1.0, 0.005)).unwrap()
            - steady_activity(&p(2.0 - h, 1.0, 0.005)).unwrap())
            / (2.0 * h);
        let sigma = sensitivity(&params).unwrap();
        assert_relative_eq!(sigma, 4.518730502861169, max_relative = 1e-12);
        assert_relative_eq!(sigma, fd, max_relative = 1e-6);
        assert_relative_eq!(sigma, sensitivity_textbook(1.0, 0.01), max_relative = 1e-12);
    }

    #[test]
    fn derivative_limits_and_sign() {
        assert_eq!(sensitivity_derivative(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(sensitivity_derivative(1e-9, 0.5).unwrap(), 0.0);
        assert!(sensitivity_derivative(1.5, 0.01).unwrap() < 0.0);
        // continuity of the limit into the closed form
        assert_relative_eq!(
            sensitivity_derivative(2e-8, 0.2).unwrap(),
            (1.0 - 0.4) / 1.2f64.powi(4),
            max_relative = 1e-6
        );
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6;
        for &(alpha, beta) in &[(0.5, 0.01), (0.2, 0.3), (1.3, 0.05), (0.9, 0.45)] {
            let fd = (sensitivity_reduced(alpha + h, beta).unwrap()
                - sensitivity_reduced(alpha - h, beta).unwrap())
                / (2.0 * h);
            let g = sensitivity_derivative(alpha, beta).unwrap();
            assert!((g - fd).abs() <= 1e-6 * fd.abs().max(1.0), "{alpha} {beta}: {g} vs {fd}");
        }
    }

    #[test]
    fn limits_and_taylor() {
        assert_eq!(activity_limits(2.0, 0.005).unwrap(), (100.0, 200.0));
        assert_eq!(activity_limits(0.5, 0.005).unwrap(), (0.0, 200.0));
        assert_eq!(activity_limits(1.0, 0.01).unwrap(), (0.0, 100.0));
        assert!(activity_limits(1.0, 0.0).is_err());

        assert_relative_eq!(critical_taylor(4e-4, 0.01).unwrap(), 0.2, max_relative = 1e-15);
        assert!(critical_taylor(0.0, 0.01).is_err());
        let ratio = steady_activity(&p(1e-6, 1.0, 0.005)).unwrap() / critical_taylor(1e-6, 0.005).unwrap();
        assert!((ratio - 1.0).abs() < 1e-2, "{ratio}");
    }

    #[test]
    fn square_root_slope_at_criticality() {
        let (m1, m2) = (1e-7, 1e-6);
        let a1 = steady_activity(&p(m1, 1.0, 0.005)).unwrap();
        let a2 = steady_activity(&p(m2, 1.0, 0.005)).unwrap();
        let slope = (a2 / a1).ln() / (m2 / m1).ln();
        assert!((slope - 0.5).abs() < 0.02, "{slope}");
    }

    #[test]
    fn discriminant_forms_agree() {
        assert_eq!(discriminant(1.0, 0.0), 0.0);
        assert_relative_eq!(discriminant(0.4, 0.1), discriminant_alt(0.4, 0.1), max_relative = 1e-14);
    }
}

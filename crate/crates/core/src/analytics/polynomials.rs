//! Polynomial and conjugate quantities behind the optimum of the sensitivity.
//!
//! `f` is the numerator of `g = d sigma / d alpha` (written with `Delta^{3/2}`),
//! `f_conjugate` flips the sign of its non-radical part, and their product is
//! the polynomial `-4 alpha^2 P(alpha, beta)`.

use super::{check_nonneg, discriminant, sensitivity_derivative, Result};

/// Discriminant threshold of the cubic `P(., beta)`.
pub const BETA0: f64 = 1.0 / 27.0;
/// Double zero of `f_conjugate(., BETA0)`.
pub const ALPHA0: f64 = 20.0 / 27.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofPolynomials {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub f: f64,
    pub f_conjugate: f64,
    pub p: f64,
    pub g: f64,
}

/// Non-radical part `(1 + beta) Delta + alpha ((beta + alpha)^2 - 1)`.
fn rational_part(alpha: f64, beta: f64, delta: f64) -> f64 {
    let s = beta + alpha;
    (1.0 + beta) * delta + alpha * (s * s - 1.0)
}

/// `P(alpha, beta) = 2a^3 + (6b - 5)a^2 + (6b^2 - 6b + 4)a + 2b^3 + 3b^2 - 1`.
pub fn cubic_p(alpha: f64, beta: f64) -> f64 {
    let (a, b) = (alpha, beta);
    ((2.0 * a + (6.0 * b - 5.0)) * a + (6.0 * b * b - 6.0 * b + 4.0)) * a
        + (2.0 * b + 3.0) * b * b
        - 1.0
}

pub fn numerator_f(alpha: f64, beta: f64) -> f64 {
    let delta = discriminant(alpha, beta);
    delta * delta.sqrt() - rational_part(alpha, beta, delta)
}

pub fn conjugate_f(alpha: f64, beta: f64) -> f64 {
    let delta = discriminant(alpha, beta);
    delta * delta.sqrt() + rational_part(alpha, beta, delta)
}

/// `d f / d beta = 3 (1 + beta + alpha) sqrt(Delta) - 3 (1 + 2b + b^2 + 2ab + a^2)`.
pub fn df_dbeta(alpha: f64, beta: f64) -> f64 {
    let (a, b) = (alpha, beta);
    3.0 * (1.0 + b + a) * discriminant(a, b).sqrt() - 3.0 * quadratic_q(a, b)
}

/// `1 + 2b + b^2 + 2ab + a^2`.
pub fn quadratic_q(alpha: f64, beta: f64) -> f64 {
    let (a, b) = (alpha, beta);
    1.0 + 2.0 * b + b * b + 2.0 * a * b + a * a
}

/// Returns the pair `(9 (1+b+a)^2 Delta - 9 Q^2, 9 (1+b+a)^2 Delta)`: the
/// product of `df/dbeta` with its conjugate, and the magnitude it was
/// computed from. The first entry equals `-36 alpha^2`.
pub fn dbeta_conjugate_product(alpha: f64, beta: f64) -> (f64, f64) {
    let s = 1.0 + beta + alpha;
    let q = quadratic_q(alpha, beta);
    let big = 9.0 * s * s * discriminant(alpha, beta);
    (big - 9.0 * q * q, big)
}

pub fn proof_polynomials(alpha: f64, beta: f64) -> Result<ProofPolynomials> {
    check_nonneg("alpha", alpha)?;
    check_nonneg("beta", beta)?;
    let delta = discriminant(alpha, beta);
    let radical = delta * delta.sqrt();
    let rational = rational_part(alpha, beta, delta);
    Ok(ProofPolynomials {
        alpha,
        beta,
        delta,
        f: radical - rational,
        f_conjugate: radical + rational,
        p: cubic_p(alpha, beta),
        g: sensitivity_derivative(alpha, beta)?,
    })
}

impl ProofPolynomials {
    /// `Delta^3` plus the square of the rational part: the size of the terms
    /// whose difference is `f * f_conjugate`.
    pub fn product_scale(&self) -> f64 {
        let rational = rational_part(self.alpha, self.beta, self.delta);
        self.delta.powi(3) + rational * rational
    }

    /// `|f f^c + 4 alpha^2 P|` relative to [`Self::product_scale`].
    pub fn product_identity_residual(&self) -> f64 {
        let lhs = self.f * self.f_conjugate;
        let rhs = -4.0 * self.alpha * self.alpha * self.p;
        (lhs - rhs).abs() / self.product_scale().max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{discriminant_alt, sensitivity_textbook};
    use proptest::prelude::*;

    #[test]
    fn cubic_at_criticality() {
        assert_eq!(cubic_p(1.0, 0.0), 0.0);
        let pp = proof_polynomials(1.0, 0.0).unwrap();
        assert_eq!(pp.delta, 0.0);
        assert_eq!(pp.p, 0.0);
    }

    #[test]
    fn conjugate_double_zero_at_alpha0() {
        let at = conjugate_f(ALPHA0, BETA0);
        assert!(at.abs() < 1e-14, "{at}");
        // double zero: a local minimum, no sign change
        let left = conjugate_f(ALPHA0 - 1e-3, BETA0);
        let right = conjugate_f(ALPHA0 + 1e-3, BETA0);
        assert!(left > at && right > at);
        // below beta0 the conjugate dips negative at alpha0
        assert!(conjugate_f(ALPHA0, BETA0 * 0.5) < 0.0);
        assert!(conjugate_f(ALPHA0, BETA0 * 1.5) > 0.0);
    }

    #[test]
    fn conjugate_endpoints_positive() {
        for &b in &[1e-6, 0.01, BETA0, 0.2, 0.45] {
            assert!((conjugate_f(0.0, b) - 2.0 * (1.0 + b).powi(3)).abs() < 1e-12);
            assert!(conjugate_f(1.0, b) > 0.0);
        }
    }

    #[test]
    fn product_identity_example() {
        let pp = proof_polynomials(0.4, 0.1).unwrap();
        let lhs = pp.f * pp.f_conjugate;
        let rhs = -4.0 * 0.16 * pp.p;
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn g_equals_f_over_denominator() {
        for &(a, b) in &[(0.3, 0.01), (0.9, 0.2), (1.6, 0.4)] {
            let pp = proof_polynomials(a, b).unwrap();
            let quotient = pp.f / (2.0 * a * a * pp.delta.powf(1.5));
            assert!((pp.g - quotient).abs() <= 1e-10 * quotient.abs().max(1e-3));
        }
    }

    #[test]
    fn degenerate_point_is_a_double_zero() {
        let pp = proof_polynomials(1.0, 0.0).unwrap();
        assert_eq!((pp.f, pp.f_conjugate), (0.0, 0.0));
    }

    #[test]
    fn f_negative_beyond_criticality() {
        for &a in &[1.0, 1.2, 2.0, 5.0] {
            for &b in &[1e-6, 0.01, 0.3, 0.49] {
                assert!(numerator_f(a, b) < 0.0, "{a} {b}");
            }
        }
    }

    #[test]
    fn f_decreasing_in_beta() {
        for &a in &[0.1, 0.5, 0.97, 1.5] {
            assert!(df_dbeta(a, 0.2) < 0.0);
            assert!(numerator_f(a, 0.3) < numerator_f(a, 0.2));
        }
    }

    proptest! {
        #[test]
        fn identities_hold(alpha in 0.01f64..2.0, beta in 0.001f64..1.0) {
            let d1 = discriminant(alpha, beta);
            let d2 = discriminant_alt(alpha, beta);
            prop_assert!((d1 - d2).abs() <= 1e-12 * d1);

            let pp = proof_polynomials(alpha, beta).unwrap();
            prop_assert!(pp.product_identity_residual() <= 1e-10);

            let (lhs, scale) = dbeta_conjugate_product(alpha, beta);
            let rhs = -36.0 * alpha * alpha;
            prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-16 * scale));
        }

        #[test]
        fn sign_of_g_is_sign_of_f(alpha in 0.01f64..3.0, beta in 0.0f64..1.0) {
            let pp = proof_polynomials(alpha, beta).unwrap();
            if pp.f.abs() > 1e-12 {
                prop_assert_eq!(pp.f > 0.0, pp.g > 0.0);
            }
        }

        #[test]
        fn sensitivity_forms_agree(alpha in 0.01f64..3.0, beta in 0.001f64..1.0) {
            let stable = crate::analytics::sensitivity_reduced(alpha, beta).unwrap();
            let textbook = sensitivity_textbook(alpha, beta);
            prop_assert!(stable > 0.0);
            prop_assert!((stable - textbook).abs() <= 1e-10 * stable.max(1.0));
        }
    }
}

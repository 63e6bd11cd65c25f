//! Gaussian tails, the elementary tail sandwich, and absolute moments.

use serde::Serialize;

use crate::error::{Error, Result};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density.
pub fn std_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// `P(eps > y)` for a standard Gaussian `eps`.
///
/// Evaluated as `erfc(y / sqrt 2) / 2`, which keeps full relative precision
/// deep in the upper tail where `1 - cdf` would cancel.
pub fn std_upper_tail(y: f64) -> f64 {
    0.5 * libm::erfc(y * std::f64::consts::FRAC_1_SQRT_2)
}

/// `P(sigma * eps > y)`.
pub fn upper_tail(y: f64, sigma: f64) -> f64 {
    std_upper_tail(y / sigma)
}

/// Lower bound, exact value and upper bound of the standard Gaussian tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBoundPair {
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
}

impl TailBoundPair {
    pub fn holds(&self) -> bool {
        self.lower <= self.exact && self.exact <= self.upper
    }
}

/// `e^{-y^2/2} / (sqrt(2 pi) y + 4) <= P(eps > y) <= e^{-y^2/2} / max(sqrt(2 pi) y, 2)`
/// for `y >= 0`.
pub fn tail_sandwich(y: f64) -> Result<TailBoundPair> {
    if !(y >= 0.0) {
        return Err(Error::invalid(format!("tail sandwich needs y >= 0, got {y}")));
    }
    let kernel = (-0.5 * y * y).exp();
    Ok(TailBoundPair {
        lower: kernel / (SQRT_2PI * y + 4.0),
        exact: std_upper_tail(y),
        upper: kernel / (SQRT_2PI * y).max(2.0),
    })
}

/// `E|xi|^q` for `xi ~ N(0, sigma^2)`: `sigma^q 2^{q/2} Gamma((q+1)/2) / sqrt(pi)`.
pub fn abs_moment_q(q: f64, sigma: f64) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::invalid(format!("moment order q must be >= 1, got {q}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    // log-space keeps large q from overflowing tgamma early
    let log_m = q * sigma.ln() + 0.5 * q * std::f64::consts::LN_2 + libm::lgamma(0.5 * (q + 1.0))
        - 0.5 * std::f64::consts::PI.ln();
    Ok(log_m.exp())
}

/// `sigma_q = (E|xi|^q)^{1/q}`.
pub fn sigma_q(q: f64, sigma: f64) -> Result<f64> {
    Ok(abs_moment_q(q, sigma)?.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    // P(eps > y) from mpmath at 30 digits.
    #[allow(clippy::excessive_precision)]
    const TAIL_REFERENCE: [(f64, f64); 6] = [
        (0.5, 0.308_537_538_725_986_9),
        (1.0, 0.158_655_253_931_457_05),
        (3.0, 0.001_349_898_031_630_094_5),
        (6.0, 9.865_876_450_376_981e-10),
        (8.0, 6.220_960_574_271_784e-16),
        (12.0, 1.776_482_112_077_679e-33),
    ];

    #[test]
    fn tail_matches_reference() {
        assert_eq!(std_upper_tail(0.0), 0.5);
        assert_eq!(std_upper_tail(f64::INFINITY), 0.0);
        assert_eq!(std_upper_tail(f64::NEG_INFINITY), 1.0);
        for (y, want) in TAIL_REFERENCE {
            let got = std_upper_tail(y);
            assert!(((got - want) / want).abs() < 1e-12, "y = {y}: {got} vs {want}");
        }
        assert!(std_upper_tail(40.0) < 1e-300);
    }

    #[test]
    fn tail_matches_density_quadrature() {
        for y in [0.25, 1.0, 2.0, 3.5] {
            let q = integrate(std_density, y, y + 12.0, 1e-14).unwrap();
            assert!((q.value - std_upper_tail(y)).abs() < 1e-13);
        }
    }

    #[test]
    fn tail_symmetry() {
        let mut y = -8.0;
        while y <= 8.0 {
            assert!((std_upper_tail(y) + std_upper_tail(-y) - 1.0).abs() < 1e-12);
            y += 0.05;
        }
    }

    #[test]
    fn sandwich_examples() {
        let z = tail_sandwich(0.0).unwrap();
        assert_eq!((z.lower, z.exact, z.upper), (0.25, 0.5, 0.5));
        let t = tail_sandwich(3.0).unwrap();
        assert!(t.holds());
        assert!((t.exact - 0.001_349_898_031_630_094_5).abs() < 1e-15);
        let far = tail_sandwich(10.0).unwrap();
        assert!(far.holds());
        assert!(far.upper / far.lower < 1.5);
        assert!(tail_sandwich(-0.1).is_err());
        assert!(tail_sandwich(f64::NAN).is_err());
    }

    #[test]
    fn sandwich_on_grid() {
        for i in 0..=100 {
            let y = i as f64 * 0.1;
            assert!(tail_sandwich(y).unwrap().holds(), "y = {y}");
        }
    }

    #[test]
    fn moment_examples() {
        assert!((abs_moment_q(2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((sigma_q(1.0, 1.0).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((abs_moment_q(4.0, 2.0).unwrap() - 48.0).abs() < 1e-11);
        assert!(abs_moment_q(0.9, 1.0).is_err());
        assert!(abs_moment_q(2.0, 0.0).is_err());
    }

    #[test]
    fn moment_matches_quadrature() {
        for q in [1.0, 1.5, 2.0, 3.0, 4.0] {
            for sigma in [0.5, 1.0, 3.0] {
                // integrate |x|^q phi_sigma over [0, 14 sigma] and double
                let f = |x: f64| x.powf(q) * std_density(x / sigma) / sigma;
                let quad = 2.0 * integrate(f, 0.0, 14.0 * sigma, 1e-14).unwrap().value;
                let closed = abs_moment_q(q, sigma).unwrap();
                assert!(((quad - closed) / closed).abs() < 1e-8, "q = {q}, sigma = {sigma}");
            }
        }
    }
}

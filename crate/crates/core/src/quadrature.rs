//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below the requested absolute tolerance. Gaussian
//! expectations are computed on `mean ± 10 sigma`; the mass outside is below
//! `2 * P(eps > 10) ≈ 1.5e-23` and its contribution is added to the reported
//! error bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::gaussian::{std_density, std_upper_tail};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Half-width, in standard deviations, of the window used for Gaussian expectations.
pub const GAUSSIAN_CUTOFF: f64 = 10.0;
const MAX_INTERVALS: usize = 4000;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Integral estimate with its absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Piece {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Piece { lo, hi, value: kron * half, error: ((kron - gauss) * half).abs() }
}

/// `∫_lo^hi f` to absolute tolerance `tol` on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Quadrature> {
    integrate_pieces(&f, &[lo, hi], tol)
}

/// Like [`integrate`], but the integrand may jump at any of `breaks`; the
/// range `breaks[0]..breaks[last]` is split there before refinement.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<Quadrature> {
    integrate_pieces(&f, breaks, tol)
}

fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> Result<Quadrature> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if breaks.len() < 2 || breaks.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("integration range must be finite"));
    }
    if breaks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("integration breakpoints must be sorted"));
    }
    let mut heap: BinaryHeap<Piece> =
        breaks.windows(2).filter(|w| w[1] > w[0]).map(|w| kronrod(f, w[0], w[1])).collect();
    loop {
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if !error.is_finite() {
            return Err(Error::invalid("integrand is not finite on the integration range"));
        }
        if error <= tol {
            let value = sum_values(&heap);
            return Ok(Quadrature { value, error });
        }
        let worst = heap.pop().expect("nonempty while error > 0");
        let mid = 0.5 * (worst.lo + worst.hi);
        let exhausted = mid <= worst.lo || mid >= worst.hi;
        if exhausted || heap.len() + 2 > MAX_INTERVALS {
            heap.push(worst);
            return Err(Error::Quadrature { estimate: sum_values(&heap), error_bound: error });
        }
        heap.push(kronrod(f, worst.lo, mid));
        heap.push(kronrod(f, mid, worst.hi));
    }
}

fn sum_values(heap: &BinaryHeap<Piece>) -> f64 {
    // deterministic order regardless of heap layout
    let mut pieces: Vec<&Piece> = heap.iter().collect();
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    pieces.iter().map(|p| p.value).sum()
}

/// `E g(mean + sigma * eps)` for standard Gaussian `eps`.
///
/// The integrand is truncated to `mean ± 10 sigma`; `breaks` lists points
/// (in the `x` scale) where `g` may be discontinuous. The truncation bound
/// assumes `|g|` beyond the window is no larger than at the window edge times
/// a polynomial factor, and is charged as `4 P(eps > 10) max(1, |g(edge)|)`.
pub fn gaussian_expectation<G: Fn(f64) -> f64>(
    g: G,
    mean: f64,
    sigma: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<Quadrature> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let lo = -GAUSSIAN_CUTOFF;
    let hi = GAUSSIAN_CUTOFF;
    let mut zs = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().map(|b| (b - mean) / sigma).filter(|z| *z > lo && *z < hi).collect();
    inner.sort_by(f64::total_cmp);
    zs.extend(inner);
    zs.push(hi);

    let edge = g(mean + lo * sigma).abs().max(g(mean + hi * sigma).abs()).max(1.0);
    let truncation = 4.0 * std_upper_tail(GAUSSIAN_CUTOFF) * edge;
    let budget = (tol - truncation).max(0.5 * tol);
    let integrand = |z: f64| g(mean + sigma * z) * std_density(z);
    match integrate_pieces(&integrand, &zs, budget) {
        Ok(q) => Ok(Quadrature { value: q.value, error: q.error + truncation }),
        Err(Error::Quadrature { estimate, error_bound }) => {
            Err(Error::Quadrature { estimate, error_bound: error_bound + truncation })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::abs_moment_q;

    #[test]
    fn constant_over_unit_interval() {
        let q = integrate(|_| 1.0, 0.0, 1.0, DEFAULT_TOL).unwrap();
        assert!((q.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-12).unwrap();
        assert!((q.value - (64.0 / 6.0 - 1.0 / 6.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_normalization() {
        for sigma in [0.1, 1.0, 7.0] {
            let q = gaussian_expectation(|_| 1.0, 2.0, sigma, &[], DEFAULT_TOL).unwrap();
            assert!((q.value - 1.0).abs() <= DEFAULT_TOL, "{}", q.value);
        }
    }

    #[test]
    fn gaussian_first_absolute_moment() {
        for sigma in [0.5, 1.0, 2.0] {
            let q = gaussian_expectation(f64::abs, 0.0, sigma, &[0.0], DEFAULT_TOL).unwrap();
            assert!((q.value - abs_moment_q(1.0, sigma).unwrap()).abs() <= DEFAULT_TOL);
        }
    }

    #[test]
    fn step_function_with_break() {
        // E 1{x >= 1.3} under N(0,1)
        let q = gaussian_expectation(|x| if x >= 1.3 { 1.0 } else { 0.0 }, 0.0, 1.0, &[1.3], 1e-12).unwrap();
        assert!((q.value - std_upper_tail(1.3)).abs() < 1e-12);
    }

    #[test]
    fn step_function_without_break_still_converges() {
        let q = gaussian_expectation(|x| if x >= 0.77 { 1.0 } else { 0.0 }, 0.0, 1.0, &[], 1e-9).unwrap();
        assert!((q.value - std_upper_tail(0.77)).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_reports_estimate() {
        match integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 1e-14) {
            Err(Error::Quadrature { estimate, error_bound }) => assert!(estimate.is_finite() && error_bound > 1e-14),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(integrate(|x| x, 0.0, f64::INFINITY, 1e-6).is_err());
        assert!(integrate(|x| x, 0.0, 1.0, 0.0).is_err());
        assert!(integrate_with_breaks(|x| x, &[1.0, 0.0], 1e-6).is_err());
        assert!(integrate(|x| 1.0 / x, 0.0, 1.0, 1e-8).is_err());
    }
}

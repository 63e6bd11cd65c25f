//! Threshold landmarks and closed-form rate functions.
//!
//! Notation: `L = log(p/s - 1)`, `LL = log L`, `t(a) = a/2 + sigma^2 L / a`,
//! `t* = sigma sqrt(2 L)` and
//! `a_q(eps) = sqrt(2 sigma^2 L + q eps sigma^2 LL) + sqrt(q eps sigma^2 LL)`.
//! Functions using `L` need `s < p/2`; functions using `LL` need `s <= p/4`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{abs_moment_q, upper_tail};
use crate::problem::{DesignSpec, ProblemConfig};

/// Which of the three scale regimes `a` falls in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum RegimeLabel {
    HardRecovery,
    /// `a = a_q(epsilon)` with `epsilon` strictly inside `(0, 1)`.
    Transition {
        epsilon: f64,
    },
    HardEstimation,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeLabel::HardRecovery => f.write_str("hard-recovery"),
            RegimeLabel::Transition { epsilon } => write!(f, "transition:{epsilon:.6}"),
            RegimeLabel::HardEstimation => f.write_str("hard-estimation"),
        }
    }
}

/// Every landmark and rate at a single scale `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub a: f64,
    pub t_of_a: f64,
    pub t_star: f64,
    pub a_q0: f64,
    pub a_q1: f64,
    pub psi: f64,
    pub psi_plus: f64,
    pub phi: f64,
    pub phi_plus: f64,
    pub phi_o: f64,
    pub phi_ad: f64,
    pub regime: RegimeLabel,
}

fn check_scale(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("scale a must be positive and finite, got {a}")))
    }
}

fn log_odds(cfg: &ProblemConfig) -> Result<f64> {
    cfg.require_noise()?;
    cfg.log_odds()
}

fn log_odds_iterated(cfg: &ProblemConfig) -> Result<(f64, f64)> {
    cfg.require_noise()?;
    cfg.log_odds_iterated()
}

/// `t(a) = a/2 + sigma^2 log(p/s - 1) / a`.
pub fn threshold_t(a: f64, cfg: &ProblemConfig) -> Result<f64> {
    check_scale(a)?;
    let l = log_odds(cfg)?;
    Ok(0.5 * a + cfg.sigma() * cfg.sigma() * l / a)
}

/// `t* = sigma sqrt(2 log(p/s - 1))`, the minimiser of `t(.)` and its fixed point.
pub fn t_star(cfg: &ProblemConfig) -> Result<f64> {
    let l = log_odds(cfg)?;
    Ok(cfg.sigma() * (2.0 * l).sqrt())
}

/// `(sqrt(2 sigma^2 L + eps c), sqrt(eps c))` with `c = q sigma^2 LL`, i.e.
/// `t(a_q(eps))` and `a_q(eps) - t(a_q(eps))`.
fn a_eps_parts(root_eps: f64, cfg: &ProblemConfig, l: f64, ll: f64) -> (f64, f64) {
    let s2 = cfg.sigma() * cfg.sigma();
    let c = cfg.q() * s2 * ll;
    let shift = root_eps * c.sqrt();
    ((2.0 * s2 * l + shift * shift).sqrt(), shift)
}

/// `a_q(eps)` for `eps in [0, 1]`; `a_q(0) = t*`.
pub fn a_eps(epsilon: f64, cfg: &ProblemConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::OutOfRange { name: "epsilon", value: epsilon, lo: 0.0, hi: 1.0 });
    }
    let (l, ll) = log_odds_iterated(cfg)?;
    let (t, gap) = a_eps_parts(epsilon.sqrt(), cfg, l, ll);
    Ok(t + gap)
}

/// Inverse of [`a_eps`] on `[a_q(0), a_q(1)]`.
///
/// Bisection runs on `sqrt(eps)`, in which `a_q` has bounded slope, until
/// the bracket collapses to adjacent floats; this keeps the round trip
/// accurate near `eps = 0` where `d a_q / d eps` is unbounded.
pub fn epsilon_of_a(a: f64, cfg: &ProblemConfig) -> Result<f64> {
    check_scale(a)?;
    let (l, ll) = log_odds_iterated(cfg)?;
    let eval = |v: f64| {
        let (t, gap) = a_eps_parts(v, cfg, l, ll);
        t + gap
    };
    let (lo_a, hi_a) = (eval(0.0), eval(1.0));
    let slack = 4.0 * f64::EPSILON * hi_a;
    if a < lo_a - slack || a > hi_a + slack {
        return Err(Error::OutOfRange { name: "a", value: a, lo: lo_a, hi: hi_a });
    }
    if a <= lo_a {
        return Ok(0.0);
    }
    if a >= hi_a {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = if (eval(hi) - a).abs() < (a - eval(lo)).abs() { hi } else { lo };
    Ok(v * v)
}

/// `psi = (p - s) P(sigma eps > t(a)) + s P(sigma eps > a - t(a))`.
pub fn psi(cfg: &ProblemConfig, a: f64) -> Result<f64> {
    let t = threshold_t(a, cfg)?;
    let (p, s, sigma) = (cfg.p() as f64, cfg.s() as f64, cfg.sigma());
    Ok((p - s) * upper_tail(t, sigma) + s * upper_tail(a - t, sigma))
}

/// Like [`psi`] with the second tail argument replaced by `(a - t(a))_+`.
///
/// Clipping a negative argument to zero can only shrink the tail, so
/// `psi_plus <= psi`, with equality whenever `a >= t(a)` (i.e. `a >= t*`).
pub fn psi_plus(cfg: &ProblemConfig, a: f64) -> Result<f64> {
    let t = threshold_t(a, cfg)?;
    let (p, s, sigma) = (cfg.p() as f64, cfg.s() as f64, cfg.sigma());
    Ok((p - s) * upper_tail(t, sigma) + s * upper_tail((a - t).max(0.0), sigma))
}

/// Per-column threshold `t_j(a) = a/2 + sigma^2 L / (a |X_j|^2)`.
pub fn column_threshold(cfg: &ProblemConfig, a: f64, col_norm: f64) -> Result<f64> {
    check_scale(a)?;
    let l = log_odds(cfg)?;
    Ok(0.5 * a + cfg.sigma() * cfg.sigma() * l / (a * col_norm * col_norm))
}

/// `Psi(p, s, a, sigma, X) = sum_j [(s/p) P(sigma eps >= (a - t_j) |X_j|) + (1 - s/p) P(sigma eps >= t_j |X_j|)]`.
pub fn psi_general(cfg: &ProblemConfig, a: f64, design: &DesignSpec) -> Result<f64> {
    check_scale(a)?;
    let l = log_odds(cfg)?;
    let norms = design.norms(cfg.p())?;
    let (p, s, sigma) = (cfg.p() as f64, cfg.s() as f64, cfg.sigma());
    let w = s / p;
    let total = norms
        .iter()
        .map(|&n| {
            let tj = 0.5 * a + sigma * sigma * l / (a * n * n);
            w * upper_tail((a - tj) * n, sigma) + (1.0 - w) * upper_tail(tj * n, sigma)
        })
        .sum();
    Ok(total)
}

/// `Psi` at the identity design written out directly:
/// `p [(s/p) P(sigma eps >= a - t(a)) + (1 - s/p) P(sigma eps >= t(a))]`.
///
/// Multiplying through by `p` turns the `s/p` weights into the `s`,
/// `p - s` counts of [`psi`], so the two agree.
pub fn psi_identity_reduction(cfg: &ProblemConfig, a: f64) -> Result<f64> {
    let t = threshold_t(a, cfg)?;
    let (p, s, sigma) = (cfg.p() as f64, cfg.s() as f64, cfg.sigma());
    Ok(p * ((s / p) * upper_tail(a - t, sigma) + (1.0 - s / p) * upper_tail(t, sigma)))
}

/// `s sigma^q (2L)^{q/2}`, the hard-recovery level.
fn recovery_level(cfg: &ProblemConfig, l: f64) -> f64 {
    cfg.s() as f64 * cfg.sigma().powf(cfg.q()) * (2.0 * l).powf(0.5 * cfg.q())
}

/// `s sigma_q^q`, the known-support level.
fn estimation_level(cfg: &ProblemConfig) -> Result<f64> {
    Ok(cfg.s() as f64 * abs_moment_q(cfg.q(), cfg.sigma())?)
}

fn phi_with(cfg: &ProblemConfig, a: f64, tails: fn(&ProblemConfig, f64) -> Result<f64>) -> Result<f64> {
    check_scale(a)?;
    let l = log_odds(cfg)?;
    if a >= t_star(cfg)? {
        Ok((a.powf(cfg.q()) * tails(cfg, a)?).max(estimation_level(cfg)?))
    } else {
        Ok(recovery_level(cfg, l))
    }
}

/// Lower-bound rate: `a^q psi ∨ s sigma_q^q` for `a >= t*`, else `s sigma^q (2L)^{q/2}`.
pub fn phi(cfg: &ProblemConfig, a: f64) -> Result<f64> {
    phi_with(cfg, a, psi)
}

/// Upper-bound rate of the scaled hard-threshold estimator; `phi` with `psi_plus`.
pub fn phi_plus(cfg: &ProblemConfig, a: f64) -> Result<f64> {
    phi_with(cfg, a, psi_plus)
}

/// Sharp rate in the small `s/p` regime, three branches split at `a_q(0)` and `a_q(1)`.
///
/// In between, `a = a_q(eps)` is inverted numerically and the rate is
/// `s sigma^q (2L)^{q(1-eps)/2} / (1 + sigma sqrt(pi/2 eps q LL)) ∨ s sigma_q^q`.
pub fn phi_o(cfg: &ProblemConfig, a: f64) -> Result<f64> {
    check_scale(a)?;
    let (l, ll) = log_odds_iterated(cfg)?;
    let (lo, hi) = (a_eps(0.0, cfg)?, a_eps(1.0, cfg)?);
    if a <= lo {
        return Ok(recovery_level(cfg, l));
    }
    if a >= hi {
        return estimation_level(cfg);
    }
    let eps = epsilon_of_a(a, cfg)?;
    let q = cfg.q();
    let numerator = cfg.s() as f64 * cfg.sigma().powf(q) * (2.0 * l).powf(0.5 * q * (1.0 - eps));
    let denominator = 1.0 + cfg.sigma() * (0.5 * std::f64::consts::PI * eps * q * ll).sqrt();
    Ok((numerator / denominator).max(estimation_level(cfg)?))
}

/// Two-level rate of the adaptive estimator: `s sigma_q^q` for `a >= a_q(1)`, else the recovery level.
pub fn phi_ad(cfg: &ProblemConfig, a: f64) -> Result<f64> {
    check_scale(a)?;
    let (l, _) = log_odds_iterated(cfg)?;
    if a >= a_eps(1.0, cfg)? {
        estimation_level(cfg)
    } else {
        Ok(recovery_level(cfg, l))
    }
}

/// Known-support bound `sigma_q^q max_{|S| = s} sum_{i in S} |X_i|^{-q}`,
/// attained at the `s` smallest column norms.
pub fn lower_bound_known_support(cfg: &ProblemConfig, design: &DesignSpec) -> Result<f64> {
    let mut inv: Vec<f64> = design.norms(cfg.p())?.iter().map(|n| n.powf(-cfg.q())).collect();
    inv.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = inv[..cfg.s()].iter().sum();
    Ok(abs_moment_q(cfg.q(), cfg.sigma())? * top)
}

/// Support-recovery bound
/// `a^q (s'/s) (2^{-q} Psi(p, s, a, sigma, X) - 2 s e^{-(s - s')^2 / (2s)})`, clamped at zero.
pub fn lower_bound_recovery(cfg: &ProblemConfig, a: f64, s_prime: f64, design: &DesignSpec) -> Result<f64> {
    let s = cfg.s() as f64;
    if !(s_prime > 0.0 && s_prime < s) {
        return Err(Error::OutOfRange { name: "s_prime", value: s_prime, lo: 0.0, hi: s });
    }
    let big_psi = psi_general(cfg, a, design)?;
    let q = cfg.q();
    let slack = 2.0 * s * (-(s - s_prime).powi(2) / (2.0 * s)).exp();
    let raw = a.powf(q) * (s_prime / s) * (big_psi / 2f64.powf(q) - slack);
    Ok(raw.max(0.0))
}

/// Regime of `a`: below `a_q(0)`, above `a_q(1)`, or in between.
pub fn regime_of(cfg: &ProblemConfig, a: f64) -> Result<RegimeLabel> {
    check_scale(a)?;
    let (lo, hi) = (a_eps(0.0, cfg)?, a_eps(1.0, cfg)?);
    Ok(if a <= lo {
        RegimeLabel::HardRecovery
    } else if a >= hi {
        RegimeLabel::HardEstimation
    } else {
        let epsilon = epsilon_of_a(a, cfg)?;
        if epsilon <= 0.0 {
            RegimeLabel::HardRecovery
        } else if epsilon >= 1.0 {
            RegimeLabel::HardEstimation
        } else {
            RegimeLabel::Transition { epsilon }
        }
    })
}

/// All landmarks and rates at `a`; needs `s <= p/4`.
pub fn rate_report(cfg: &ProblemConfig, a: f64) -> Result<RateReport> {
    Ok(RateReport {
        a,
        t_of_a: threshold_t(a, cfg)?,
        t_star: t_star(cfg)?,
        a_q0: a_eps(0.0, cfg)?,
        a_q1: a_eps(1.0, cfg)?,
        psi: psi(cfg, a)?,
        psi_plus: psi_plus(cfg, a)?,
        phi: phi(cfg, a)?,
        phi_plus: phi_plus(cfg, a)?,
        phi_o: phi_o(cfg, a)?,
        phi_ad: phi_ad(cfg, a)?,
        regime: regime_of(cfg, a)?,
    })
}

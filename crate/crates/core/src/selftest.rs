//! Release-gate numerical checks run by `smse selftest`.

use crate::error::Result;
use crate::estimators::EstimatorSpec;
use crate::gaussian::{abs_moment_q, tail_sandwich};
use crate::montecarlo::{empirical_risk, Metric};
use crate::problem::{worst_case_signal, ProblemConfig, ScaleParam, SupportPattern};
use crate::quadrature::{gaussian_expectation, DEFAULT_TOL};
use crate::rates::{a_eps, t_star, threshold_t};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fault injection for negative tests of the gate itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hooks {
    /// Multiplies the closed-form moment before it is compared with quadrature.
    pub moment_scale: f64,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks { moment_scale: 1.0 }
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

fn tail_grid() -> Result<(bool, String)> {
    let mut bad = 0;
    for i in 0..=100 {
        if !tail_sandwich(i as f64 / 10.0)?.holds() {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("101 points, {bad} violations")))
}

fn moments(hooks: &Hooks) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for q in [1.0, 1.5, 2.0, 3.0, 4.0] {
        for sigma in [0.5, 1.0, 2.0] {
            let closed = hooks.moment_scale * abs_moment_q(q, sigma)?;
            let quad = gaussian_expectation(|x: f64| x.abs().powf(q), 0.0, sigma, &[0.0], DEFAULT_TOL)?.value;
            worst = worst.max((closed - quad).abs() / quad);
        }
    }
    Ok((worst <= 1e-8, format!("max relative gap {worst:.3e}")))
}

fn fixed_point() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for &(p, s) in &[(10, 1), (100, 3), (1000, 10), (16384, 16), (1 << 20, 100)] {
        for sigma in [0.5, 1.0, 3.0] {
            let cfg = ProblemConfig::new(p, s, sigma, 2.0)?;
            let ts = t_star(&cfg)?;
            worst = worst.max((threshold_t(ts, &cfg)? - ts).abs());
        }
    }
    Ok((worst < 1e-12, format!("max |t(t*) - t*| = {worst:.3e}")))
}

fn aq_identities() -> Result<(bool, String)> {
    let cfg = ProblemConfig::new(1 << 14, 16, 1.0, 2.0)?;
    let (l, ll) = cfg.log_odds_iterated()?;
    let mut worst = 0.0f64;
    for eps in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let a = a_eps(eps, &cfg)?;
        let t = threshold_t(a, &cfg)?;
        let want_t = (2.0 * l + cfg.q() * eps * ll).sqrt();
        let want_gap = (cfg.q() * eps * ll).sqrt();
        worst = worst.max((t - want_t).abs()).max((a - t - want_gap).abs());
    }
    Ok((worst < 1e-10, format!("max gap {worst:.3e}")))
}

fn oracle_calibration() -> Result<(bool, String)> {
    let cfg = ProblemConfig::new(1024, 16, 1.0, 2.0)?;
    let beta = worst_case_signal(&cfg, ScaleParam::new(4.0)?, SupportPattern::Prefix);
    let spec = EstimatorSpec::OracleSupport { support: beta.support().to_vec() };
    let est = empirical_risk(&spec, &beta, &cfg, 2000, 7, Metric::LqRisk { q: 2.0 })?;
    let want = 16.0 * abs_moment_q(2.0, 1.0)?;
    let z = (est.mean - want) / est.std_err;
    Ok((z.abs() <= 4.0, format!("risk {:.4} vs {want:.4}, z = {z:.2}", est.mean)))
}

pub fn run(hooks: &Hooks) -> Vec<Check> {
    vec![
        check("tail-sandwich", tail_grid()),
        check("moments-vs-quadrature", moments(hooks)),
        check("threshold-fixed-point", fixed_point()),
        check("a_q-identities", aq_identities()),
        check("oracle-calibration", oracle_calibration()),
    ]
}

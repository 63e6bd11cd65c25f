//! Per-coordinate Bayes rules under the two-point prior `beta_j = a * eta_j`,
//! `eta_j ~ Bernoulli(rho)`, and their Bayes risks.
//!
//! Under `q`-th power loss the posterior-risk minimiser is logistic in the
//! observation for `q > 1` and an indicator for `q = 1`:
//!
//! ```text
//! T(z) = 1 / (1 + exp(a / ((q - 1) sigma^2) * (t - z)))     q > 1
//! T(z) = 1{z >= t}                                          q = 1
//! ```
//!
//! where `t` is the posterior-odds threshold. With `t = a/2 + sigma^2 log((1-rho)/rho) / a`
//! this is the exact Bayes rule for the prior; the lower-bound argument
//! instead plugs in `t(a)` built from `s`, which we expose as well.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{abs_moment_q, upper_tail};
use crate::problem::{DesignSpec, ProblemConfig};
use crate::quadrature::gaussian_expectation;
use crate::rates::{lower_bound_recovery, threshold_t};

/// Exponent magnitude beyond which the logistic rule is saturated to 0 or 1.
const SATURATION: f64 = 700.0;

/// Margin below which [`verify_lower_bound`] reports a violation.
pub const DOMINANCE_SLACK: f64 = 1e-6;

/// `beta = a` with probability `rho`, else `0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointPrior {
    a: f64,
    rho: f64,
}

impl TwoPointPrior {
    pub fn new(a: f64, rho: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!("prior atom a must be positive, got {a}")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::OutOfRange { name: "rho", value: rho, lo: 0.0, hi: 1.0 });
        }
        Ok(Self { a, rho })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleForm {
    Logistic,
    Indicator,
}

/// A Bayes-type rule: loss exponent, threshold and the matching form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesRuleEval {
    q: f64,
    threshold: f64,
    form: RuleForm,
}

impl BayesRuleEval {
    /// Logistic for `q > 1`, indicator for `q = 1`.
    pub fn new(q: f64, threshold: f64) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::invalid(format!("loss exponent q must be >= 1, got {q}")));
        }
        if !threshold.is_finite() {
            return Err(Error::invalid("rule threshold must be finite"));
        }
        let form = if q == 1.0 { RuleForm::Indicator } else { RuleForm::Logistic };
        Ok(Self { q, threshold, form })
    }

    /// Indicator rule `1{z >= threshold}` scored under loss exponent `q`.
    pub fn indicator(q: f64, threshold: f64) -> Result<Self> {
        let mut rule = Self::new(q, threshold)?;
        rule.form = RuleForm::Indicator;
        Ok(rule)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn form(&self) -> RuleForm {
        self.form
    }

    /// Rule value at observation `z` for atom `a` and noise `sigma`.
    pub fn eval(&self, a: f64, sigma: f64, z: f64) -> f64 {
        match self.form {
            RuleForm::Indicator => indicator(z, self.threshold),
            RuleForm::Logistic => logistic(a / ((self.q - 1.0) * sigma * sigma) * (self.threshold - z)),
        }
    }
}

fn indicator(z: f64, t: f64) -> f64 {
    if z >= t {
        1.0
    } else {
        0.0
    }
}

/// `1 / (1 + e^x)`, saturated outside `|x| <= 700`.
fn logistic(x: f64) -> f64 {
    if x > SATURATION {
        0.0
    } else if x < -SATURATION {
        1.0
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Bayes rule at unit noise: `1 / (1 + e^{(a/(q-1)) (t - z)})` for `q > 1`,
/// `1{z >= t}` for `q = 1`.
pub fn bayes_rule(q: f64, a: f64, t: f64, z: f64) -> f64 {
    if q == 1.0 {
        indicator(z, t)
    } else {
        logistic(a / (q - 1.0) * (t - z))
    }
}

/// Posterior-odds threshold `a/2 + sigma^2 log((1 - rho)/rho) / a`.
pub fn matched_threshold(prior: &TwoPointPrior, sigma: f64) -> f64 {
    0.5 * prior.a + sigma * sigma * ((1.0 - prior.rho) / prior.rho).ln() / prior.a
}

/// `a^q [rho E_a |T - 1|^q + (1 - rho) E_0 |T|^q]` by quadrature, to
/// absolute accuracy `1e-9` on the returned value.
pub fn component_bayes_risk(q: f64, prior: &TwoPointPrior, sigma: f64, rule: &BayesRuleEval) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("loss exponent q must be >= 1, got {q}")));
    }
    let a = prior.a;
    let scale = a.powf(q);
    let tol = 1e-9 / (2.0 * scale.max(1.0));
    let breaks = [rule.threshold];
    let miss = gaussian_expectation(|z| (1.0 - rule.eval(a, sigma, z)).abs().powf(q), a, sigma, &breaks, tol)?;
    let false_alarm = gaussian_expectation(|z| rule.eval(a, sigma, z).abs().powf(q), 0.0, sigma, &breaks, tol)?;
    Ok(scale * (prior.rho * miss.value + (1.0 - prior.rho) * false_alarm.value))
}

/// Closed form of [`component_bayes_risk`] for an indicator rule at `t`:
/// `a^q [rho P(sigma eps < t - a) + (1 - rho) P(sigma eps >= t)]`.
pub fn indicator_risk_closed_form(q: f64, prior: &TwoPointPrior, sigma: f64, t: f64) -> f64 {
    prior.a.powf(q) * (prior.rho * upper_tail(prior.a - t, sigma) + (1.0 - prior.rho) * upper_tail(t, sigma))
}

/// Oracle risks next to the closed-form support-recovery bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    pub a: f64,
    pub s_prime: f64,
    /// `p` times the component risk under the `s'/p` prior, rule thresholded at `t(a)`.
    pub oracle_risk: f64,
    /// Same with the posterior-odds threshold for the `s'/p` prior.
    pub matched_oracle_risk: f64,
    pub bound: f64,
    pub margin: f64,
}

impl LowerBoundCheck {
    pub fn holds(&self) -> bool {
        self.margin >= -DOMINANCE_SLACK
    }
}

/// Compares `p` times the per-coordinate oracle risk under prior
/// `rho = s'/p` with the recovery bound at the identity design.
pub fn verify_lower_bound(cfg: &ProblemConfig, a: f64, s_prime: f64) -> Result<LowerBoundCheck> {
    let p = cfg.p() as f64;
    let bound = lower_bound_recovery(cfg, a, s_prime, &DesignSpec::Identity)?;
    let prior = TwoPointPrior::new(a, s_prime / p)?;
    let t_rule = BayesRuleEval::new(cfg.q(), threshold_t(a, cfg)?)?;
    let matched_rule = BayesRuleEval::new(cfg.q(), matched_threshold(&prior, cfg.sigma()))?;
    let oracle_risk = p * component_bayes_risk(cfg.q(), &prior, cfg.sigma(), &t_rule)?;
    let matched_oracle_risk = p * component_bayes_risk(cfg.q(), &prior, cfg.sigma(), &matched_rule)?;
    Ok(LowerBoundCheck { a, s_prime, oracle_risk, matched_oracle_risk, bound, margin: oracle_risk - bound })
}

/// Bayes risk of one coordinate under a `N(mu, nu^2)` prior observed
/// through a column of norm `col_norm`:
/// `(nu sigma / (nu col_norm + sigma))^q E|eps|^q`.
pub fn gaussian_prior_component_risk(nu: f64, col_norm: f64, sigma: f64, q: f64) -> Result<f64> {
    if !(col_norm > 0.0 && sigma > 0.0) {
        return Err(Error::invalid("column norm and sigma must be positive"));
    }
    if !(nu >= 0.0) {
        return Err(Error::invalid(format!("prior scale nu must be nonnegative, got {nu}")));
    }
    let std_moment = abs_moment_q(q, 1.0)?;
    if nu.is_infinite() {
        return Ok((sigma / col_norm).powf(q) * std_moment);
    }
    Ok((nu * sigma / (nu * col_norm + sigma)).powf(q) * std_moment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::t_star;

    #[test]
    fn rule_examples() {
        assert_eq!(bayes_rule(2.0, 3.0, 1.2, 1.2), 0.5);
        assert_eq!(bayes_rule(1.0, 3.0, 1.2, 1.1), 0.0);
        assert_eq!(bayes_rule(1.0, 3.0, 1.2, 1.2), 1.0);
        assert_eq!(bayes_rule(2.0, 2.0, 0.0, f64::INFINITY), 1.0);
        assert_eq!(bayes_rule(2.0, 2.0, 0.0, f64::NEG_INFINITY), 0.0);
        assert_eq!(bayes_rule(1.5, 2.0, 0.0, 1e300), 1.0);
        let r = BayesRuleEval::new(3.0, 1.0).unwrap();
        assert_eq!(r.form(), RuleForm::Logistic);
        assert_eq!(BayesRuleEval::new(1.0, 1.0).unwrap().form(), RuleForm::Indicator);
        assert_eq!(r.eval(2.0, 1.0, 1.7), bayes_rule(3.0, 2.0, 1.0, 1.7));
    }

    #[test]
    fn matched_threshold_examples() {
        let half = TwoPointPrior::new(3.0, 0.5).unwrap();
        assert!((matched_threshold(&half, 1.7) - 1.5).abs() < 1e-15);
        let c = ProblemConfig::new(1024, 32, 1.3, 2.0).unwrap();
        let a = 2.7;
        let prior = TwoPointPrior::new(a, 32.0 / 1024.0).unwrap();
        assert!((matched_threshold(&prior, 1.3) - threshold_t(a, &c).unwrap()).abs() < 1e-13);
        // s' = s/2: shift by sigma^2 log((p - s')/s' * s/(p - s)) / a
        let half_prior = TwoPointPrior::new(a, 16.0 / 1024.0).unwrap();
        let shift = 1.69 * ((1008.0f64 / 16.0) * (32.0 / 992.0)).ln() / a;
        assert!((matched_threshold(&half_prior, 1.3) - threshold_t(a, &c).unwrap() - shift).abs() < 1e-13);
    }

    #[test]
    fn indicator_quadrature_matches_closed_form() {
        for q in [1.0, 2.0, 3.0] {
            for (a, rho, sigma) in [(3.0, 0.1, 1.0), (0.7, 0.02, 0.5), (6.0, 0.3, 2.0)] {
                let prior = TwoPointPrior::new(a, rho).unwrap();
                for t in [0.0, 0.5 * a, a, matched_threshold(&prior, sigma)] {
                    let rule = BayesRuleEval::indicator(q, t).unwrap();
                    let quad = component_bayes_risk(q, &prior, sigma, &rule).unwrap();
                    let closed = indicator_risk_closed_form(q, &prior, sigma, t);
                    assert!((quad - closed).abs() < 1e-9, "q={q} a={a} t={t}: {quad} vs {closed}");
                }
            }
        }
    }

    #[test]
    fn limits() {
        let rule = BayesRuleEval::new(1.0, 0.5).unwrap();
        let tiny = TwoPointPrior::new(1e-6, 0.3).unwrap();
        assert!(component_bayes_risk(1.0, &tiny, 1.0, &rule).unwrap() < 1e-6);
        let rare = TwoPointPrior::new(2.0, 1e-12).unwrap();
        let never = BayesRuleEval::indicator(2.0, 1e6).unwrap();
        assert!(component_bayes_risk(2.0, &rare, 1.0, &never).unwrap() < 1e-10);
    }

    /// Risk of the two-level step rule `v0 1{z < t} + v1 1{z >= t}`, in closed form.
    fn step_rule_risk(q: f64, prior: &TwoPointPrior, sigma: f64, t: f64, v0: f64, v1: f64) -> f64 {
        let a = prior.a();
        let p_hi_signal = upper_tail(t - a, sigma);
        let p_hi_null = upper_tail(t, sigma);
        let signal = (1.0 - v0).abs().powf(q) * (1.0 - p_hi_signal) + (1.0 - v1).abs().powf(q) * p_hi_signal;
        let null = v0.abs().powf(q) * (1.0 - p_hi_null) + v1.abs().powf(q) * p_hi_null;
        a.powf(q) * (prior.rho() * signal + (1.0 - prior.rho()) * null)
    }

    #[test]
    fn logistic_beats_step_rules() {
        let prior = TwoPointPrior::new(3.0, 0.1).unwrap();
        let rule = BayesRuleEval::new(2.0, matched_threshold(&prior, 1.0)).unwrap();
        let logistic = component_bayes_risk(2.0, &prior, 1.0, &rule).unwrap();
        let mut best = f64::INFINITY;
        for i in 0..=120 {
            let t = -1.0 + 6.0 * i as f64 / 120.0;
            for j in 0..=20 {
                for k in j..=20 {
                    best = best.min(step_rule_risk(2.0, &prior, 1.0, t, j as f64 / 20.0, k as f64 / 20.0));
                }
            }
        }
        assert!(logistic <= best + 1e-4, "{logistic} vs {best}");
    }

    #[test]
    fn matched_indicator_is_optimal_for_q1() {
        for (a, rho) in [(1.0, 0.05), (3.0, 0.1), (5.0, 0.01), (2.0, 0.4)] {
            let prior = TwoPointPrior::new(a, rho).unwrap();
            let matched = indicator_risk_closed_form(1.0, &prior, 1.0, matched_threshold(&prior, 1.0));
            for i in 0..=1000 {
                let t = a * i as f64 / 1000.0;
                assert!(indicator_risk_closed_form(1.0, &prior, 1.0, t) >= matched - 1e-6);
            }
        }
    }

    #[test]
    fn logistic_beats_indicators_for_q_above_one() {
        for q in [1.5, 2.0, 3.0] {
            for (a, rho) in [(1.0, 0.05), (3.0, 0.1), (5.0, 0.01)] {
                let prior = TwoPointPrior::new(a, rho).unwrap();
                let rule = BayesRuleEval::new(q, matched_threshold(&prior, 1.0)).unwrap();
                let soft = component_bayes_risk(q, &prior, 1.0, &rule).unwrap();
                let hard = (0..=600)
                    .map(|i| indicator_risk_closed_form(q, &prior, 1.0, -a + 3.0 * a * i as f64 / 600.0))
                    .fold(f64::INFINITY, f64::min);
                assert!(soft <= hard + 1e-9, "q={q} a={a}: {soft} vs {hard}");
            }
        }
    }

    #[test]
    fn dominance_on_instances() {
        for q in [1.0, 2.0] {
            let c = ProblemConfig::new(1024, 32, 1.0, q).unwrap();
            let ts = t_star(&c).unwrap();
            for a in [0.3 * ts, ts, 2.0 * ts, 60.0] {
                let rec = verify_lower_bound(&c, a, 16.0).unwrap();
                assert!(rec.holds(), "{rec:?}");
                assert!(rec.matched_oracle_risk <= rec.oracle_risk + 1e-6);
            }
            let huge = verify_lower_bound(&c, 200.0, 16.0).unwrap();
            assert!(huge.bound == 0.0 && huge.oracle_risk < 1e-3);
            let vanishing = verify_lower_bound(&c, ts, 1e-9).unwrap();
            assert!(vanishing.bound < 1e-6 && vanishing.holds());
        }
    }

    #[test]
    fn gaussian_prior_risk() {
        assert!((gaussian_prior_component_risk(1.0, 1.0, 1.0, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(gaussian_prior_component_risk(0.0, 1.0, 1.0, 2.0).unwrap(), 0.0);
        for q in [1.0, 2.0, 3.5] {
            let lim = gaussian_prior_component_risk(f64::INFINITY, 1.0, 1.7, q).unwrap();
            assert!((lim - abs_moment_q(q, 1.7).unwrap()).abs() < 1e-12);
            let big = gaussian_prior_component_risk(1e9, 1.0, 1.7, q).unwrap();
            assert!((big - lim).abs() / lim < 1e-8);
            let norm2 = gaussian_prior_component_risk(f64::INFINITY, 2.0, 1.7, q).unwrap();
            assert!((norm2 - lim / 2f64.powf(q)).abs() < 1e-12);
        }
    }
}

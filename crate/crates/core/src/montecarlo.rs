//! Seeded Monte Carlo estimates of the `l_q` risk, Hamming loss and exact
//! support recovery of the thresholding estimators.
//!
//! Replication `r` draws its noise from `child_seed(seed, r)`. Replications
//! run in parallel, are collected in index order and then reduced with
//! compensated summation, so results are bit-identical for any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorSpec};
use crate::gaussian::abs_moment_q;
use crate::problem::{sample_observation, worst_case_signal, ProblemConfig, ScaleParam, SparseSignal, SupportPattern};
use crate::rates::{phi, phi_ad, phi_o, phi_plus, regime_of, RegimeLabel};
use crate::stream::child_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "metric", rename_all = "kebab-case")]
pub enum Metric {
    LqRisk { q: f64 },
    Hamming,
    ExactRecovery,
}

/// Sample mean and standard error (`sd / sqrt(reps)`) over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub reps: usize,
    pub seed: u64,
    pub metric: Metric,
}

/// Losses of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub lq_loss: f64,
    pub hamming: f64,
    pub exact: f64,
}

/// The three metrics from one set of replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSet {
    pub risk: RiskEstimate,
    pub hamming: RiskEstimate,
    pub exact_recovery: RiskEstimate,
}

/// Neumaier-compensated sum, evaluated in slice order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn summarize(values: &[f64], seed: u64, metric: Metric) -> RiskEstimate {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    RiskEstimate { mean, std_err: (var / n).sqrt(), reps: values.len(), seed, metric }
}

fn losses(estimate: &SparseSignal, beta: &SparseSignal, q: f64) -> Replication {
    let mut lq = Vec::with_capacity(estimate.len());
    let mut hamming = 0usize;
    for (e, b) in estimate.values().iter().zip(beta.values()) {
        lq.push((e - b).abs().powf(q));
        if (*e != 0.0) != (*b != 0.0) {
            hamming += 1;
        }
    }
    Replication { lq_loss: compensated_sum(lq), hamming: hamming as f64, exact: if hamming == 0 { 1.0 } else { 0.0 } }
}

/// Per-replication losses, in replication order.
pub fn replicate(
    spec: &EstimatorSpec,
    beta: &SparseSignal,
    cfg: &ProblemConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<Replication>> {
    if reps < 2 {
        return Err(Error::invalid(format!("need at least 2 replications, got {reps}")));
    }
    // validate once so that every replication either succeeds or none runs
    spec.threshold(cfg)?;
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let y = sample_observation(beta, cfg, child_seed(seed, r))?;
            let est = estimate(spec, &y, cfg)?;
            Ok(losses(&est, beta, cfg.q()))
        })
        .collect()
}

/// All three metrics from the same replications.
pub fn empirical_metrics(
    spec: &EstimatorSpec,
    beta: &SparseSignal,
    cfg: &ProblemConfig,
    reps: usize,
    seed: u64,
) -> Result<MetricSet> {
    let runs = replicate(spec, beta, cfg, reps, seed)?;
    let col = |f: fn(&Replication) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
    Ok(MetricSet {
        risk: summarize(&col(|r| r.lq_loss), seed, Metric::LqRisk { q: cfg.q() }),
        hamming: summarize(&col(|r| r.hamming), seed, Metric::Hamming),
        exact_recovery: summarize(&col(|r| r.exact), seed, Metric::ExactRecovery),
    })
}

/// Monte Carlo estimate of one metric. `LqRisk` must use the config's `q`.
pub fn empirical_risk(
    spec: &EstimatorSpec,
    beta: &SparseSignal,
    cfg: &ProblemConfig,
    reps: usize,
    seed: u64,
    metric: Metric,
) -> Result<RiskEstimate> {
    if let Metric::LqRisk { q } = metric {
        if q != cfg.q() {
            return Err(Error::invalid(format!("metric exponent {q} differs from config q = {}", cfg.q())));
        }
    }
    let set = empirical_metrics(spec, beta, cfg, reps, seed)?;
    Ok(match metric {
        Metric::LqRisk { .. } => set.risk,
        Metric::Hamming => set.hamming,
        Metric::ExactRecovery => set.exact_recovery,
    })
}

/// An estimator as a function of the grid scale `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EstimatorFamily {
    /// `ScaledHard(a)` at each grid point.
    Scaled,
    Adaptive,
    /// Oracle on the true support of the probe signal.
    Oracle,
    Universal {
        tau: f64,
    },
}

impl EstimatorFamily {
    pub fn instantiate(&self, a: f64, beta: &SparseSignal) -> Result<EstimatorSpec> {
        match self {
            EstimatorFamily::Scaled => EstimatorSpec::scaled(a),
            EstimatorFamily::Adaptive => Ok(EstimatorSpec::AdaptiveHard),
            EstimatorFamily::Oracle => Ok(EstimatorSpec::OracleSupport { support: beta.support().to_vec() }),
            EstimatorFamily::Universal { tau } => EstimatorSpec::universal(*tau),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EstimatorFamily::Scaled => "scaled".into(),
            EstimatorFamily::Adaptive => "adaptive".into(),
            EstimatorFamily::Oracle => "oracle".into(),
            EstimatorFamily::Universal { tau } => format!("universal:{tau}"),
        }
    }
}

impl std::str::FromStr for EstimatorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "scaled" => Ok(Self::Scaled),
            "adaptive" => Ok(Self::Adaptive),
            "oracle" => Ok(Self::Oracle),
            _ => {
                let tau = s
                    .strip_prefix("universal:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown estimator '{s}'")))?;
                EstimatorSpec::universal(tau)?;
                Ok(Self::Universal { tau })
            }
        }
    }
}

/// One grid point of a sweep for one estimator. `None` marks a quantity
/// outside its domain for this config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub a: f64,
    pub estimator: String,
    pub regime: Option<RegimeLabel>,
    pub metrics: Option<MetricSet>,
    pub phi: Option<f64>,
    pub phi_plus: Option<f64>,
    pub phi_o: Option<f64>,
    pub phi_ad: Option<f64>,
    pub ratio_to_phi_o: Option<f64>,
}

impl SweepRow {
    pub fn risk_mean(&self) -> Option<f64> {
        self.metrics.map(|m| m.risk.mean)
    }
}

/// Runs every estimator family at every grid value on the probe
/// `worst_case_signal(cfg, a, Prefix)`.
///
/// All grid points share the master seed, so neighbouring points see the
/// same noise draws.
pub fn sweep(
    cfg: &ProblemConfig,
    families: &[EstimatorFamily],
    a_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if a_grid.is_empty() {
        return Err(Error::invalid("a-grid is empty"));
    }
    if families.is_empty() {
        return Err(Error::invalid("no estimators requested"));
    }
    if a_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("a-grid must be sorted"));
    }
    if reps < 2 {
        return Err(Error::invalid(format!("need at least 2 replications, got {reps}")));
    }
    let mut rows = Vec::with_capacity(a_grid.len() * families.len());
    for &a in a_grid {
        let scale = ScaleParam::new(a)?;
        let beta = worst_case_signal(cfg, scale, SupportPattern::Prefix);
        let phi_o_val = phi_o(cfg, a).ok();
        for family in families {
            let metrics =
                match family.instantiate(a, &beta).and_then(|spec| empirical_metrics(&spec, &beta, cfg, reps, seed)) {
                    Ok(m) => Some(m),
                    Err(Error::InvalidInput(_) | Error::OutOfRange { .. }) => None,
                    Err(e) => return Err(e),
                };
            let ratio_to_phi_o = match (metrics, phi_o_val) {
                (Some(m), Some(po)) if po > 0.0 => Some(m.risk.mean / po),
                _ => None,
            };
            rows.push(SweepRow {
                a,
                estimator: family.label(),
                regime: regime_of(cfg, a).ok(),
                metrics,
                phi: phi(cfg, a).ok(),
                phi_plus: phi_plus(cfg, a).ok(),
                phi_o: phi_o_val,
                phi_ad: phi_ad(cfg, a).ok(),
                ratio_to_phi_o,
            });
        }
    }
    Ok(rows)
}

/// Empirical `P(S_hat = S)` per grid value.
pub fn exact_recovery_curve(
    cfg: &ProblemConfig,
    family: &EstimatorFamily,
    a_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<(f64, RiskEstimate)>> {
    let rows = sweep(cfg, std::slice::from_ref(family), a_grid, reps, seed)?;
    rows.into_iter()
        .map(|r| {
            let m = r.metrics.ok_or_else(|| Error::invalid(format!("estimator undefined at a = {}", r.a)))?;
            Ok((r.a, m.exact_recovery))
        })
        .collect()
}

/// Largest observed `risk / phi_plus` over the rows and whether every row
/// satisfies `risk <= 1.2 * C_obs * phi_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedConstant {
    pub c_obs: f64,
    pub holds: bool,
}

pub fn observed_phi_plus_constant(rows: &[SweepRow]) -> Option<ObservedConstant> {
    let pairs: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.risk_mean()?, r.phi_plus?))).collect();
    let c_obs = pairs.iter().map(|(risk, pp)| risk / pp).fold(f64::NEG_INFINITY, f64::max);
    if pairs.is_empty() || !c_obs.is_finite() {
        return None;
    }
    let holds = pairs.iter().all(|(risk, pp)| *risk <= 1.2 * c_obs * pp);
    Some(ObservedConstant { c_obs, holds })
}

/// A grid point where the risk is within `risk_ratio_max` of the
/// known-support level `s sigma_q^q` while exact recovery still fails with
/// probability at least `1 - recovery_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationPoint {
    pub a: f64,
    pub risk_ratio: f64,
    pub exact_recovery: f64,
}

pub fn find_separation_point(
    cfg: &ProblemConfig,
    rows: &[SweepRow],
    risk_ratio_max: f64,
    recovery_max: f64,
) -> Result<Option<SeparationPoint>> {
    let level = cfg.s() as f64 * abs_moment_q(cfg.q(), cfg.sigma())?;
    Ok(rows.iter().find_map(|r| {
        let m = r.metrics?;
        let risk_ratio = m.risk.mean / level;
        (risk_ratio <= risk_ratio_max && m.exact_recovery.mean <= recovery_max).then_some(SeparationPoint {
            a: r.a,
            risk_ratio,
            exact_recovery: m.exact_recovery.mean,
        })
    }))
}

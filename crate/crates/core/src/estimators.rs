//! Coordinate-wise hard-thresholding estimators.
//!
//! Every variant keeps `y_j` when `|y_j| >= threshold` and zeroes it
//! otherwise; a coordinate sitting exactly on the threshold is kept.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{NoisyObservation, ProblemConfig, SparseSignal};
use crate::rates::{t_star, threshold_t};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EstimatorSpec {
    /// Threshold `t(a ∨ t*)` tuned to a known scale `a`.
    ScaledHard { a: f64 },
    /// Scale-free threshold `sqrt(2 sigma^2 L + sigma^2 q LL)`.
    AdaptiveHard,
    /// Keeps `y` on a given support and zeroes the rest.
    OracleSupport { support: Vec<usize> },
    /// Fixed threshold `tau`.
    UniversalHard { tau: f64 },
}

impl EstimatorSpec {
    pub fn scaled(a: f64) -> Result<Self> {
        if a.is_finite() && a > 0.0 {
            Ok(Self::ScaledHard { a })
        } else {
            Err(Error::invalid(format!("scaled estimator needs a > 0, got {a}")))
        }
    }

    pub fn universal(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau >= 0.0 {
            Ok(Self::UniversalHard { tau })
        } else {
            Err(Error::invalid(format!("universal threshold needs tau >= 0, got {tau}")))
        }
    }

    /// Threshold applied to `|y_j|`, or `None` for the oracle.
    pub fn threshold(&self, cfg: &ProblemConfig) -> Result<Option<f64>> {
        match self {
            EstimatorSpec::ScaledHard { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::invalid(format!("scaled estimator needs a > 0, got {a}")));
                }
                if cfg.sigma() == 0.0 {
                    return Ok(Some(0.5 * a));
                }
                let ts = t_star(cfg)?;
                Ok(Some(threshold_t(a.max(ts), cfg)?))
            }
            EstimatorSpec::AdaptiveHard => adaptive_threshold(cfg).map(Some),
            EstimatorSpec::OracleSupport { .. } => Ok(None),
            EstimatorSpec::UniversalHard { tau } => {
                if tau.is_finite() && *tau >= 0.0 {
                    Ok(Some(*tau))
                } else {
                    Err(Error::invalid(format!("universal threshold needs tau >= 0, got {tau}")))
                }
            }
        }
    }

    /// Short name used in reports.
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::ScaledHard { .. } => "scaled".to_string(),
            EstimatorSpec::AdaptiveHard => "adaptive".to_string(),
            EstimatorSpec::OracleSupport { .. } => "oracle".to_string(),
            EstimatorSpec::UniversalHard { tau } => format!("universal:{tau}"),
        }
    }
}

/// `t*_s = sqrt(2 sigma^2 log(p/s - 1) + sigma^2 q log log(p/s - 1))`; needs `s <= p/4`.
pub fn adaptive_threshold(cfg: &ProblemConfig) -> Result<f64> {
    let (l, ll) = cfg.log_odds_iterated()?;
    let s2 = cfg.sigma() * cfg.sigma();
    Ok((2.0 * s2 * l + s2 * cfg.q() * ll).sqrt())
}

/// Hard thresholding of a raw vector at `threshold`.
pub fn hard_threshold(y: &[f64], threshold: f64) -> SparseSignal {
    SparseSignal::new(y.iter().map(|&v| if v.abs() >= threshold { v } else { 0.0 }).collect())
}

pub fn estimate(spec: &EstimatorSpec, y: &NoisyObservation, cfg: &ProblemConfig) -> Result<SparseSignal> {
    if y.len() != cfg.p() {
        return Err(Error::invalid(format!("observation has length {}, config has p = {}", y.len(), cfg.p())));
    }
    match spec {
        EstimatorSpec::OracleSupport { support } => {
            let mut out = vec![0.0; cfg.p()];
            for &i in support {
                let v = *y.y.get(i).ok_or_else(|| {
                    Error::invalid(format!("oracle support index {i} out of range for p = {}", cfg.p()))
                })?;
                out[i] = v;
            }
            Ok(SparseSignal::new(out))
        }
        _ => {
            let t = spec.threshold(cfg)?.expect("threshold variants");
            Ok(hard_threshold(&y.y, t))
        }
    }
}

/// Indices of the nonzero coordinates.
pub fn support_of(beta_hat: &SparseSignal) -> Vec<usize> {
    beta_hat.support().to_vec()
}

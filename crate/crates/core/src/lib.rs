//! Scale-aware sparse estimation in the Gaussian sequence model
//! `y = beta + sigma * xi`.
//!
//! The crate provides hard-thresholding estimators tuned to a lower bound `a`
//! on the nonzero magnitudes, closed-form risk rate functions and lower
//! bounds, Bayes rules under two-point priors, and a seeded Monte Carlo
//! harness for checking the rates empirically.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod gaussian;
pub mod montecarlo;
pub mod problem;
pub mod quadrature;
pub mod rates;
pub mod selftest;
pub mod stream;

pub use error::{Error, Result};
pub use estimators::{adaptive_threshold, estimate, hard_threshold, support_of, EstimatorSpec};
pub use montecarlo::{empirical_metrics, empirical_risk, sweep, EstimatorFamily, Metric, RiskEstimate, SweepRow};
pub use problem::{
    check_membership, sample_observation, worst_case_signal, DesignSpec, NoisyObservation, ProblemConfig, ScaleParam,
    SparseSignal, SupportPattern,
};
pub use rates::{
    a_eps, epsilon_of_a, phi, phi_ad, phi_o, phi_plus, psi, psi_plus, regime_of, t_star, threshold_t, RegimeLabel,
};

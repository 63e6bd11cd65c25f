//! Observation model `y = beta + sigma * xi` and the signal class of
//! `s`-sparse vectors whose nonzero entries have magnitude at least `a`.
//!
//! Indices are zero-based throughout.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stream::{block_rng, BLOCK_LEN};

/// Ambient experiment parameters: dimension `p`, sparsity `s`, noise level
/// `sigma` and loss exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConfig {
    p: usize,
    s: usize,
    sigma: f64,
    q: f64,
}

impl ProblemConfig {
    pub fn new(p: usize, s: usize, sigma: f64, q: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Self::build(p, s, sigma, q)
    }

    /// Zero-noise configuration, `y = beta` exactly. Only meant for tests of
    /// the estimators and the harness; rate functions are not defined here.
    #[doc(hidden)]
    pub fn noiseless(p: usize, s: usize, q: f64) -> Result<Self> {
        Self::build(p, s, 0.0, q)
    }

    fn build(p: usize, s: usize, sigma: f64, q: f64) -> Result<Self> {
        if s == 0 {
            return Err(Error::invalid("sparsity s must be at least 1"));
        }
        if s >= p {
            return Err(Error::invalid(format!("sparsity s = {s} must be below p = {p}")));
        }
        if !(q.is_finite() && q >= 1.0) {
            return Err(Error::invalid(format!("loss exponent q must be >= 1, got {q}")));
        }
        Ok(Self { p, s, sigma, q })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Same config with a different loss exponent.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::build(self.p, self.s, self.sigma, q)
    }

    /// Same config with a different noise level (`sigma > 0`).
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.p, self.s, sigma, self.q)
    }

    /// `log(p/s - 1)`; requires `s < p/2` so that it is positive.
    pub fn log_odds(&self) -> Result<f64> {
        if 2 * self.s >= self.p {
            return Err(Error::invalid(format!("requires s < p/2 (p = {}, s = {})", self.p, self.s)));
        }
        Ok((self.p as f64 / self.s as f64 - 1.0).ln())
    }

    /// `(log(p/s - 1), log log(p/s - 1))`; requires `s <= p/4` and a
    /// positive iterated logarithm.
    pub fn log_odds_iterated(&self) -> Result<(f64, f64)> {
        if 4 * self.s > self.p {
            return Err(Error::invalid(format!("requires s <= p/4 (p = {}, s = {})", self.p, self.s)));
        }
        let l = self.log_odds()?;
        if l <= 1.0 {
            return Err(Error::invalid(format!("requires log(p/s - 1) > 1, got {l}")));
        }
        Ok((l, l.ln()))
    }

    pub(crate) fn require_noise(&self) -> Result<()> {
        if self.sigma > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("rate functions need sigma > 0"))
        }
    }
}

/// Minimal nonzero magnitude `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ScaleParam(f64);

impl ScaleParam {
    pub fn new(a: f64) -> Result<Self> {
        if a.is_finite() && a > 0.0 {
            Ok(Self(a))
        } else {
            Err(Error::invalid(format!("scale a must be positive and finite, got {a}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A length-`p` vector together with its sorted support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseSignal {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl SparseSignal {
    pub fn new(values: Vec<f64>) -> Self {
        let support = values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
        Self { values, support }
    }

    pub fn zeros(p: usize) -> Self {
        Self { values: vec![0.0; p], support: Vec::new() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of nonzero entries.
    pub fn l0(&self) -> usize {
        self.support.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A draw of `y = beta + sigma * xi` and the seed that produced the noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyObservation {
    pub y: Vec<f64>,
    pub seed: u64,
}

impl NoisyObservation {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Design seen only through its column norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DesignSpec {
    Identity,
    ColumnNorms(Vec<f64>),
}

impl DesignSpec {
    pub fn column_norms(norms: Vec<f64>) -> Result<Self> {
        if let Some(bad) = norms.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
            return Err(Error::invalid(format!("column norms must be positive, got {bad}")));
        }
        Ok(Self::ColumnNorms(norms))
    }

    /// Column norms for a `p`-column design; `Identity` expands to ones.
    pub fn norms(&self, p: usize) -> Result<Vec<f64>> {
        match self {
            DesignSpec::Identity => Ok(vec![1.0; p]),
            DesignSpec::ColumnNorms(n) if n.len() == p => {
                if n.iter().all(|x| x.is_finite() && *x > 0.0) {
                    Ok(n.clone())
                } else {
                    Err(Error::invalid("column norms must be positive"))
                }
            }
            DesignSpec::ColumnNorms(n) => Err(Error::invalid(format!("design has {} columns, expected {p}", n.len()))),
        }
    }
}

/// Where a probe signal puts its nonzeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SupportPattern {
    /// Indices `0..s`.
    Prefix,
    /// `s` indices drawn uniformly without replacement from the given seed.
    Seeded(u64),
}

/// Whether `beta` is `s`-sparse with every nonzero of magnitude at least `a`.
pub fn check_membership(beta: &SparseSignal, cfg: &ProblemConfig, a: ScaleParam) -> Result<bool> {
    if beta.len() != cfg.p() {
        return Err(Error::invalid(format!("signal has length {}, config has p = {}", beta.len(), cfg.p())));
    }
    Ok(beta.l0() <= cfg.s() && beta.support.iter().all(|&i| beta.values[i].abs() >= a.get()))
}

/// Probe signal with exactly `s` entries equal to `+a`.
///
/// Risk of the thresholding estimators is sign symmetric, and the class
/// shrinks as `a` grows, so the minimal magnitude is the natural probe.
pub fn worst_case_signal(cfg: &ProblemConfig, a: ScaleParam, pattern: SupportPattern) -> SparseSignal {
    let mut values = vec![0.0; cfg.p()];
    match pattern {
        SupportPattern::Prefix => values[..cfg.s()].fill(a.get()),
        SupportPattern::Seeded(seed) => {
            let mut rng = block_rng(seed, u64::MAX);
            for i in index::sample(&mut rng, cfg.p(), cfg.s()) {
                values[i] = a.get();
            }
        }
    }
    SparseSignal::new(values)
}

/// Draws `y = beta + sigma * xi`. The noise is a pure function of `seed`:
/// coordinate block `b` comes from its own ChaCha stream, so the result does
/// not depend on evaluation order.
pub fn sample_observation(beta: &SparseSignal, cfg: &ProblemConfig, seed: u64) -> Result<NoisyObservation> {
    if beta.len() != cfg.p() {
        return Err(Error::invalid(format!("signal has length {}, config has p = {}", beta.len(), cfg.p())));
    }
    let sigma = cfg.sigma();
    let mut y = beta.values.clone();
    if sigma > 0.0 {
        for (b, chunk) in y.chunks_mut(BLOCK_LEN).enumerate() {
            let mut rng = block_rng(seed, b as u64);
            for v in chunk {
                let xi: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * xi;
            }
        }
    }
    Ok(NoisyObservation { y, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(p: usize, s: usize) -> ProblemConfig {
        ProblemConfig::new(p, s, 1.0, 2.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ProblemConfig::new(4, 0, 1.0, 2.0).is_err());
        assert!(ProblemConfig::new(4, 4, 1.0, 2.0).is_err());
        assert!(ProblemConfig::new(4, 1, 0.0, 2.0).is_err());
        assert!(ProblemConfig::new(4, 1, 1.0, 0.5).is_err());
        assert!(cfg(4, 2).log_odds().is_err());
        assert!(cfg(5, 2).log_odds().is_ok());
        assert!(cfg(8, 3).log_odds_iterated().is_err());
        assert!(cfg(8, 2).log_odds_iterated().is_ok());
    }

    #[test]
    fn membership_examples() {
        let c = cfg(6, 2);
        let a = ScaleParam::new(3.0).unwrap();
        assert!(check_membership(&SparseSignal::zeros(6), &c, a).unwrap());
        let mut v = vec![0.0; 6];
        v[0] = 3.0;
        assert!(check_membership(&SparseSignal::new(v.clone()), &c, a).unwrap());
        v[0] = -2.999;
        assert!(!check_membership(&SparseSignal::new(v.clone()), &c, a).unwrap());
        let dense = SparseSignal::new(vec![3.0, 4.0, -5.0, 0.0, 0.0, 0.0]);
        assert!(!check_membership(&dense, &c, a).unwrap());
        assert!(check_membership(&SparseSignal::zeros(5), &c, a).is_err());
    }

    #[test]
    fn worst_case_examples() {
        let c = cfg(4, 2);
        let w = worst_case_signal(&c, ScaleParam::new(3.0).unwrap(), SupportPattern::Prefix);
        assert_eq!(w.values(), &[3.0, 3.0, 0.0, 0.0]);
        assert_eq!(w.support(), &[0, 1]);

        let c = ProblemConfig::new(11, 10, 1.0, 2.0).unwrap();
        let w = worst_case_signal(&c, ScaleParam::new(1.0).unwrap(), SupportPattern::Prefix);
        assert_eq!(w.l0(), 10);

        let c = cfg(100, 7);
        let w = worst_case_signal(&c, ScaleParam::new(2.0).unwrap(), SupportPattern::Seeded(9));
        assert_eq!(w.l0(), 7);
        assert_eq!(w, worst_case_signal(&c, ScaleParam::new(2.0).unwrap(), SupportPattern::Seeded(9)));
    }

    #[test]
    fn noiseless_hook_returns_signal() {
        let c = ProblemConfig::noiseless(5, 1, 2.0).unwrap();
        let b = SparseSignal::new(vec![1.0, 0.0, 0.0, 0.0, -2.0]);
        assert_eq!(sample_observation(&b, &c, 3).unwrap().y, b.values());
    }

    #[test]
    fn noise_is_centered() {
        // 10^5 draws of a p = 10 vector; the pooled mean has sd 1/sqrt(10^6).
        let c = cfg(10, 1);
        let beta = SparseSignal::new(vec![1.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let n = 100_000u64;
        let mut total = 0.0;
        for r in 0..n {
            let obs = sample_observation(&beta, &c, crate::stream::child_seed(42, r)).unwrap();
            total += obs.y.iter().zip(beta.values()).map(|(y, b)| y - b).sum::<f64>();
        }
        let mean = total / (n as f64 * 10.0);
        assert!(mean.abs() < 4.0 / ((n * 10) as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn blocks_are_independent_of_length() {
        // Coordinates in block 0 do not depend on how many blocks follow.
        let short = sample_observation(&SparseSignal::zeros(BLOCK_LEN), &cfg(BLOCK_LEN, 1), 5).unwrap();
        let long = sample_observation(&SparseSignal::zeros(3 * BLOCK_LEN), &cfg(3 * BLOCK_LEN, 1), 5).unwrap();
        assert_eq!(short.y[..], long.y[..BLOCK_LEN]);
    }

    proptest! {
        #[test]
        fn probes_are_members(p in 2usize..200, frac in 0.0f64..1.0, a in 0.01f64..50.0, seed: u64) {
            let s = 1 + ((p - 2) as f64 * frac) as usize;
            let c = cfg(p, s);
            let a = ScaleParam::new(a).unwrap();
            for pat in [SupportPattern::Prefix, SupportPattern::Seeded(seed)] {
                let w = worst_case_signal(&c, a, pat);
                prop_assert_eq!(w.l0(), s);
                prop_assert!(check_membership(&w, &c, a).unwrap());
            }
        }

        #[test]
        fn membership_is_monotone(vals in proptest::collection::vec(-5.0f64..5.0, 8), s in 1usize..7, a in 0.1f64..4.0, ds in 0usize..3, shrink in 0.0f64..1.0) {
            let beta = SparseSignal::new(vals.into_iter().map(|v| if v.abs() < 1.0 { 0.0 } else { v }).collect());
            let c = cfg(8, s);
            let c2 = cfg(8, (s + ds).min(7));
            let a1 = ScaleParam::new(a).unwrap();
            let a2 = ScaleParam::new(a * shrink.max(1e-3)).unwrap();
            if check_membership(&beta, &c, a1).unwrap() {
                prop_assert!(check_membership(&beta, &c2, a2).unwrap());
            }
        }

        #[test]
        fn sampling_is_pure(seed: u64, p in 2usize..3000) {
            let c = cfg(p, 1);
            let b = SparseSignal::zeros(p);
            prop_assert_eq!(sample_observation(&b, &c, seed).unwrap(), sample_observation(&b, &c, seed).unwrap());
        }
    }
}

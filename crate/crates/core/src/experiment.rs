//! Experiment configuration and tabular reports.
//!
//! A configuration is assembled from up to three layers, later layers
//! winning: a TOML file of flat keys, `SMSE_*` environment variables, and
//! command-line flags. Keys:
//!
//! | key         | env               | meaning                                      |
//! |-------------|-------------------|----------------------------------------------|
//! | `p`         | `SMSE_P`          | dimension (default 16384)                    |
//! | `s`         | `SMSE_S`          | sparsity (default 16)                        |
//! | `sigma`     | `SMSE_SIGMA`      | noise level (default 1)                      |
//! | `q`         | `SMSE_Q`          | loss exponent (default 2)                    |
//! | `a_min`     | `SMSE_A_MIN`      | grid start (default `t*/2`)                  |
//! | `a_max`     | `SMSE_A_MAX`      | grid end (default `3 a_q(1)`)                |
//! | `a_steps`   | `SMSE_A_STEPS`    | grid size (default 12)                       |
//! | `a_spacing` | `SMSE_A_SPACING`  | `linear` or `log` (default `log`)            |
//! | `a_values`  | `SMSE_A_VALUES`   | explicit grid, overrides the range keys      |
//! | `estimators`| `SMSE_ESTIMATORS` | `scaled`, `adaptive`, `oracle`, `universal:<tau>` |
//! | `reps`      | `SMSE_REPS`       | Monte Carlo replications (default 200)       |
//! | `seed`      | `SMSE_SEED`       | master seed (default 1)                      |
//! | `out`       | `SMSE_OUT`        | output path (default stdout)                 |
//! | `format`    | `SMSE_FORMAT`     | `csv` or `json` (default `csv`)              |
//! | `s_prime`   | `SMSE_S_PRIME`    | prior sparsity for `bayes-check` (default `s/2`) |
//!
//! List values in environment variables are comma separated.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;
use serde_json::{Map, Number, Value};

use crate::bayes::verify_lower_bound;
use crate::error::{Error, Result};
use crate::montecarlo::{sweep, EstimatorFamily, SweepRow};
use crate::problem::ProblemConfig;
use crate::rates::{a_eps, phi, phi_ad, phi_o, phi_plus, psi, psi_plus, regime_of, t_star, threshold_t};

/// Bumped whenever a column is added, removed or reordered.
pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_OF_DOMAIN: &str = "out-of-domain";

pub const SWEEP_COLUMNS: [&str; 19] = [
    "a",
    "regime",
    "estimator",
    "q",
    "p",
    "s",
    "sigma",
    "reps",
    "seed",
    "risk_mean",
    "risk_stderr",
    "hamming_mean",
    "hamming_stderr",
    "exact_recovery",
    "phi",
    "phi_plus",
    "phi_o",
    "phi_ad",
    "ratio_to_phi_o",
];

pub const RATES_COLUMNS: [&str; 12] =
    ["a", "t_of_a", "t_star", "a_q0", "a_q1", "psi", "psi_plus", "phi", "phi_plus", "phi_o", "phi_ad", "regime"];

pub const BAYES_COLUMNS: [&str; 7] = ["a", "s_prime", "oracle_risk", "matched_oracle_risk", "bound", "margin", "holds"];

pub const DEFAULT_P: usize = 1 << 14;
pub const DEFAULT_S: usize = 16;
pub const DEFAULT_STEPS: usize = 12;
pub const DEFAULT_REPS: usize = 200;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(Error::invalid(format!("spacing must be 'linear' or 'log', got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(format!("format must be 'csv' or 'json', got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Explicit(Vec<f64>),
    Range { min: f64, max: f64, steps: usize, spacing: Spacing },
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            GridSpec::Explicit(v) => {
                if v.is_empty() {
                    return Err(Error::invalid("a-grid is empty"));
                }
                if v.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(Error::invalid("a-grid values must be positive and finite"));
                }
                let mut v = v.clone();
                v.sort_by(f64::total_cmp);
                Ok(v)
            }
            &GridSpec::Range { min, max, steps, spacing } => {
                if steps == 0 {
                    return Err(Error::invalid("a-grid is empty: a_steps must be at least 1"));
                }
                if !(min.is_finite() && max.is_finite() && min > 0.0 && max >= min) {
                    return Err(Error::invalid(format!("a-grid needs 0 < a_min <= a_max, got [{min}, {max}]")));
                }
                if steps == 1 {
                    return Ok(vec![min]);
                }
                let n = (steps - 1) as f64;
                Ok((0..steps)
                    .map(|i| {
                        let f = i as f64 / n;
                        match spacing {
                            Spacing::Linear => min + f * (max - min),
                            Spacing::Log => (min.ln() + f * (max.ln() - min.ln())).exp(),
                        }
                    })
                    .map(|a| a.clamp(min, max))
                    .collect())
            }
        }
    }
}

/// One configuration layer; every key optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub p: Option<usize>,
    pub s: Option<usize>,
    pub sigma: Option<f64>,
    pub q: Option<f64>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub a_steps: Option<usize>,
    pub a_spacing: Option<Spacing>,
    pub a_values: Option<Vec<f64>>,
    pub estimators: Option<Vec<String>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub s_prime: Option<f64>,
}

fn parse_env<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::invalid(format!("cannot parse {key}='{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').filter(|v| !v.trim().is_empty()).map(|v| parse_env(key, v)).collect()
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("malformed config file: {e}")))
    }

    /// Reads the `SMSE_*` variables; unrelated variables are ignored.
    pub fn from_env<I, K, V>(vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut raw = RawConfig::default();
        for (k, v) in vars {
            let (k, v) = (k.as_ref(), v.as_ref());
            let Some(name) = k.strip_prefix("SMSE_") else { continue };
            match name {
                "P" => raw.p = Some(parse_env(k, v)?),
                "S" => raw.s = Some(parse_env(k, v)?),
                "SIGMA" => raw.sigma = Some(parse_env(k, v)?),
                "Q" => raw.q = Some(parse_env(k, v)?),
                "A_MIN" => raw.a_min = Some(parse_env(k, v)?),
                "A_MAX" => raw.a_max = Some(parse_env(k, v)?),
                "A_STEPS" => raw.a_steps = Some(parse_env(k, v)?),
                "A_SPACING" => raw.a_spacing = Some(parse_env(k, v)?),
                "A_VALUES" => raw.a_values = Some(parse_list(k, v)?),
                "ESTIMATORS" => raw.estimators = Some(parse_list(k, v)?),
                "REPS" => raw.reps = Some(parse_env(k, v)?),
                "SEED" => raw.seed = Some(parse_env(k, v)?),
                "OUT" => raw.out = Some(PathBuf::from(v)),
                "FORMAT" => raw.format = Some(parse_env(k, v)?),
                "S_PRIME" => raw.s_prime = Some(parse_env(k, v)?),
                _ => return Err(Error::invalid(format!("unknown environment variable {k}"))),
            }
        }
        Ok(raw)
    }

    /// `self` with every key set in `over` replaced.
    pub fn overlay(self, over: RawConfig) -> RawConfig {
        RawConfig {
            p: over.p.or(self.p),
            s: over.s.or(self.s),
            sigma: over.sigma.or(self.sigma),
            q: over.q.or(self.q),
            a_min: over.a_min.or(self.a_min),
            a_max: over.a_max.or(self.a_max),
            a_steps: over.a_steps.or(self.a_steps),
            a_spacing: over.a_spacing.or(self.a_spacing),
            a_values: over.a_values.or(self.a_values),
            estimators: over.estimators.or(self.estimators),
            reps: over.reps.or(self.reps),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            s_prime: over.s_prime.or(self.s_prime),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cfg: ProblemConfig,
    pub grid: GridSpec,
    pub estimators: Vec<EstimatorFamily>,
    pub reps: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub s_prime: f64,
}

impl ExperimentConfig {
    /// Fills in defaults and validates. The default grid is a 12-point log
    /// grid over `[t*/2, 3 a_q(1)]`, which needs `s <= p/4`.
    pub fn resolve(raw: RawConfig) -> Result<Self> {
        let cfg = ProblemConfig::new(
            raw.p.unwrap_or(DEFAULT_P),
            raw.s.unwrap_or(DEFAULT_S),
            raw.sigma.unwrap_or(1.0),
            raw.q.unwrap_or(2.0),
        )?;
        let grid = match raw.a_values {
            Some(v) => GridSpec::Explicit(v),
            None => {
                let min = match raw.a_min {
                    Some(v) => v,
                    None => 0.5 * t_star(&cfg).map_err(|e| Error::invalid(format!("no default a_min: {e}")))?,
                };
                let max = match raw.a_max {
                    Some(v) => v,
                    None => 3.0 * a_eps(1.0, &cfg).map_err(|e| Error::invalid(format!("no default a_max: {e}")))?,
                };
                GridSpec::Range {
                    min,
                    max,
                    steps: raw.a_steps.unwrap_or(DEFAULT_STEPS),
                    spacing: raw.a_spacing.unwrap_or(Spacing::Log),
                }
            }
        };
        grid.values()?;
        let estimators = match raw.estimators {
            Some(list) => list.iter().map(|e| e.parse()).collect::<Result<Vec<EstimatorFamily>>>()?,
            None => vec![EstimatorFamily::Scaled],
        };
        if estimators.is_empty() {
            return Err(Error::invalid("no estimators requested"));
        }
        let reps = raw.reps.unwrap_or(DEFAULT_REPS);
        if reps < 2 {
            return Err(Error::invalid(format!("reps must be at least 2, got {reps}")));
        }
        let s_prime = raw.s_prime.unwrap_or(cfg.s() as f64 / 2.0);
        Ok(ExperimentConfig {
            cfg,
            grid,
            estimators,
            reps,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            output_path: raw.out,
            format: raw.format.unwrap_or(OutputFormat::Csv),
            s_prime,
        })
    }

    pub fn a_values(&self) -> Result<Vec<f64>> {
        self.grid.values()
    }
}

/// A single table cell. Non-finite floats are written as out-of-domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    OutOfDomain,
}

impl Cell {
    fn float(v: Option<f64>) -> Cell {
        match v {
            Some(x) if x.is_finite() => Cell::Float(x),
            _ => Cell::OutOfDomain,
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Float(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::Float(_) | Cell::OutOfDomain => OUT_OF_DOMAIN.to_string(),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => Number::from_f64(*x).map(Value::Number).unwrap_or_else(|| Value::from(OUT_OF_DOMAIN)),
            Cell::OutOfDomain => Value::from(OUT_OF_DOMAIN),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

fn regime_cell(cfg: &ProblemConfig, a: f64) -> Cell {
    regime_of(cfg, a).map(|r| Cell::Text(r.to_string())).unwrap_or(Cell::OutOfDomain)
}

/// Landmarks and rates per grid value; each field is marked out-of-domain on
/// its own.
pub fn rates_table(cfg: &ProblemConfig, a_grid: &[f64]) -> Result<Table> {
    if a_grid.is_empty() {
        return Err(Error::invalid("a-grid is empty"));
    }
    let rows = a_grid
        .iter()
        .map(|&a| {
            vec![
                Cell::Float(a),
                Cell::float(threshold_t(a, cfg).ok()),
                Cell::float(t_star(cfg).ok()),
                Cell::float(a_eps(0.0, cfg).ok()),
                Cell::float(a_eps(1.0, cfg).ok()),
                Cell::float(psi(cfg, a).ok()),
                Cell::float(psi_plus(cfg, a).ok()),
                Cell::float(phi(cfg, a).ok()),
                Cell::float(phi_plus(cfg, a).ok()),
                Cell::float(phi_o(cfg, a).ok()),
                Cell::float(phi_ad(cfg, a).ok()),
                regime_cell(cfg, a),
            ]
        })
        .collect();
    Ok(Table { columns: RATES_COLUMNS.to_vec(), rows })
}

pub fn sweep_table(exp: &ExperimentConfig, rows: &[SweepRow]) -> Table {
    let cfg = &exp.cfg;
    let rows = rows
        .iter()
        .map(|r| {
            let m = r.metrics;
            vec![
                Cell::Float(r.a),
                r.regime.map(|g| Cell::Text(g.to_string())).unwrap_or(Cell::OutOfDomain),
                Cell::Text(r.estimator.clone()),
                Cell::Float(cfg.q()),
                Cell::Int(cfg.p() as u64),
                Cell::Int(cfg.s() as u64),
                Cell::Float(cfg.sigma()),
                Cell::Int(exp.reps as u64),
                Cell::Int(exp.seed),
                Cell::float(m.map(|m| m.risk.mean)),
                Cell::float(m.map(|m| m.risk.std_err)),
                Cell::float(m.map(|m| m.hamming.mean)),
                Cell::float(m.map(|m| m.hamming.std_err)),
                Cell::float(m.map(|m| m.exact_recovery.mean)),
                Cell::float(r.phi),
                Cell::float(r.phi_plus),
                Cell::float(r.phi_o),
                Cell::float(r.phi_ad),
                Cell::float(r.ratio_to_phi_o),
            ]
        })
        .collect();
    Table { columns: SWEEP_COLUMNS.to_vec(), rows }
}

pub fn run_sweep(exp: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    sweep(&exp.cfg, &exp.estimators, &exp.a_values()?, exp.reps, exp.seed)
}

/// Dominance check per grid value, plus whether all rows hold.
pub fn bayes_check_table(exp: &ExperimentConfig) -> Result<(Table, bool)> {
    let mut all = true;
    let mut rows = Vec::new();
    for a in exp.a_values()? {
        let c = verify_lower_bound(&exp.cfg, a, exp.s_prime)?;
        let finite = [c.oracle_risk, c.matched_oracle_risk, c.bound, c.margin].iter().all(|v| v.is_finite());
        let holds = finite && c.holds();
        all &= holds;
        rows.push(vec![
            Cell::Float(a),
            Cell::Float(c.s_prime),
            Cell::float(Some(c.oracle_risk)),
            Cell::float(Some(c.matched_oracle_risk)),
            Cell::float(Some(c.bound)),
            Cell::float(Some(c.margin)),
            Cell::Bool(holds),
        ]);
    }
    Ok((Table { columns: BAYES_COLUMNS.to_vec(), rows }, all))
}

/// Human-readable digest of a sweep, one line per estimator.
pub fn sweep_summary(exp: &ExperimentConfig, rows: &[SweepRow]) -> Result<String> {
    use crate::montecarlo::{find_separation_point, observed_phi_plus_constant};
    let mut out = String::new();
    for fam in &exp.estimators {
        let label = fam.label();
        let mine: Vec<SweepRow> = rows.iter().filter(|r| r.estimator == label).cloned().collect();
        let ratios: Vec<f64> = mine.iter().filter_map(|r| r.ratio_to_phi_o).collect();
        let _ = write!(out, "{label}:");
        if ratios.is_empty() {
            let _ = write!(out, " ratio_to_phi_o {OUT_OF_DOMAIN}");
        } else {
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = write!(out, " ratio_to_phi_o min {lo:.4} max {hi:.4}");
        }
        if let Some(c) = observed_phi_plus_constant(&mine) {
            let _ = write!(out, "; C_obs {:.4} (sandwich {})", c.c_obs, if c.holds { "holds" } else { "violated" });
        }
        match find_separation_point(&exp.cfg, &mine, 1.6, 0.5)? {
            Some(sp) => {
                let _ = write!(
                    out,
                    "; separation at a = {:.6} (risk/(s sigma_q^q) = {:.4}, P(exact recovery) = {:.4})",
                    sp.a, sp.risk_ratio, sp.exact_recovery
                );
            }
            None => out.push_str("; no separation point on grid"),
        }
        out.push('\n');
    }
    Ok(out)
}

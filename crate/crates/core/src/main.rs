use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smse::experiment::{
    bayes_check_table, rates_table, run_sweep, sweep_summary, sweep_table, ExperimentConfig, OutputFormat, RawConfig,
    Spacing, Table,
};
use smse::selftest::{self, Hooks};
use smse::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_ASSERTION: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "smse", version, about = "Scale-aware sparse estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate thresholds, landmarks and rate functions over the a-grid
    Rates(Common),
    /// Monte Carlo risk sweep over the a-grid
    Sweep(Common),
    /// Compare Bayes-oracle risks with the support-recovery lower bound
    BayesCheck(Common),
    /// Run the numerical release checks
    Selftest {
        #[arg(long, hide = true, default_value_t = 1.0)]
        corrupt_moment: f64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file of flat keys; environment and flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    a_min: Option<f64>,
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    a_steps: Option<usize>,
    /// linear or log
    #[arg(long)]
    a_spacing: Option<String>,
    /// Explicit comma-separated grid; overrides the range flags
    #[arg(long, value_delimiter = ',')]
    a_values: Option<Vec<f64>>,
    /// scaled, adaptive, oracle or universal:<tau>; repeatable
    #[arg(long = "estimator")]
    estimators: Vec<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Prior sparsity s' for bayes-check
    #[arg(long)]
    s_prime: Option<f64>,
}

enum Failure {
    Usage(String),
    Assertion(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Quadrature { .. } => Failure::Assertion(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl Common {
    fn resolve(self) -> Result<ExperimentConfig, Failure> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
                RawConfig::from_toml(&text)?
            }
            None => RawConfig::default(),
        };
        let env = RawConfig::from_env(std::env::vars())?;
        let flags = RawConfig {
            p: self.p,
            s: self.s,
            sigma: self.sigma,
            q: self.q,
            a_min: self.a_min,
            a_max: self.a_max,
            a_steps: self.a_steps,
            a_spacing: self.a_spacing.as_deref().map(str::parse::<Spacing>).transpose()?,
            a_values: self.a_values,
            estimators: (!self.estimators.is_empty()).then_some(self.estimators),
            reps: self.reps,
            seed: self.seed,
            out: self.out,
            format: self.format.as_deref().map(str::parse::<OutputFormat>).transpose()?,
            s_prime: self.s_prime,
        };
        Ok(ExperimentConfig::resolve(file.overlay(env).overlay(flags))?)
    }
}

fn emit(table: &Table, format: OutputFormat, out: Option<&Path>) -> Result<(), Failure> {
    let text = table.render(format);
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Rates(common) => {
            let exp = common.resolve()?;
            let table = rates_table(&exp.cfg, &exp.a_values()?)?;
            emit(&table, exp.format, exp.output_path.as_deref())
        }
        Command::Sweep(common) => {
            let exp = common.resolve()?;
            let rows = run_sweep(&exp)?;
            emit(&sweep_table(&exp, &rows), exp.format, exp.output_path.as_deref())?;
            eprint!("{}", sweep_summary(&exp, &rows)?);
            Ok(())
        }
        Command::BayesCheck(common) => {
            let exp = common.resolve()?;
            let (table, all_hold) = bayes_check_table(&exp)?;
            emit(&table, exp.format, exp.output_path.as_deref())?;
            if all_hold {
                Ok(())
            } else {
                Err(Failure::Assertion("oracle risk fell below the lower bound".into()))
            }
        }
        Command::Selftest { corrupt_moment } => {
            let checks = selftest::run(&Hooks { moment_scale: corrupt_moment });
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(Failure::Assertion(format!("{failed} selftest check(s) failed")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_ASSERTION)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}

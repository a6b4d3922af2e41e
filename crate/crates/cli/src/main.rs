//! Batch front end: `riskdp <solve|evaluate|verify|sweep> CONFIG`.
//!
//! Exit codes: 0 ok, 1 verification failure or non-monotone sweep, 2 config
//! error, 3 non-convergence, 4 I/O error.

mod config;
mod tables;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use riskdp::problem::first_decrease;
use riskdp::verify::{self, VerifyOptions};
use riskdp::{evaluate_policy, sweep, Error, SweepParam};

/// Default depth of the enumeration suites when the config has no horizon.
const DEFAULT_VERIFY_DEPTH: usize = 3;
const SWEEP_SLACK: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "riskdp", version, about = "Risk-averse dynamic programming on finite-grid Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for V* and an epsilon-optimal policy.
    Solve { config: PathBuf },
    /// Evaluate a fixed policy over the configured horizon.
    Evaluate {
        config: PathBuf,
        /// Policy table with columns stage,state,action.
        #[arg(long)]
        policy: PathBuf,
    },
    /// Run the oracle-agreement suites.
    Verify {
        config: PathBuf,
        /// Scales the oracle's density caps to check that mismatches are caught.
        #[arg(long, hide = true, default_value_t = 1.0)]
        corrupt_cap: f64,
    },
    /// Re-solve for a list of risk parameters.
    Sweep {
        config: PathBuf,
        /// alpha (AV@R level) or kappa (mean-deviation coefficient).
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Mismatch(String),
    Config(String),
    NotConverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Mismatch(_) => 1,
            Self::Config(_) => 2,
            Self::NotConverged(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            Self::Mismatch(m) => ("verification failed", m),
            Self::Config(m) => ("config error", m),
            Self::NotConverged(m) => ("not converged", m),
            Self::Io(m) => ("I/O error", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } | Error::NonMonotone { .. } => Self::NotConverged(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

fn prepare_output(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn solve(path: &Path) -> Result<(), Failure> {
    let run = config::load(path)?;
    let risk = &run.config.risk;
    let report = run.problem.solve(&run.model, risk, &run.settings())?;
    let out = &run.config.output_dir;
    prepare_output(out)?;
    tables::write_json(&out.join("report.json"), &report)?;
    tables::write_values(&out.join("values.csv"), &run.model, &report.converged_value)?;
    tables::write_policy(&out.join("policy.csv"), &report.policy)?;
    let x0 = run.problem.x0();
    println!(
        "{risk}: V*({x0}) = {} after {} sweeps; N0 = {} (c_bar {}, epsilon {})",
        run.model.grid().interpolate(&report.converged_value, x0),
        report.residuals.len(),
        report.horizon,
        report.tail_bound,
        report.epsilon,
    );
    Ok(())
}

fn evaluate(path: &Path, policy_path: &Path) -> Result<(), Failure> {
    let run = config::load(path)?;
    let horizon = run
        .config
        .horizon
        .ok_or_else(|| Failure::Config("evaluate needs a horizon".into()))?;
    let policy = tables::read_policy(policy_path, run.model.num_states())?;
    let w = evaluate_policy(&run.model, &run.config.risk, &policy, horizon)?;
    let out = &run.config.output_dir;
    prepare_output(out)?;
    tables::write_values(&out.join("evaluation.csv"), &run.model, &w)?;
    let x0 = run.problem.x0();
    println!(
        "{}: W_0({x0}) = {} over stages 0..={horizon}",
        run.config.risk,
        run.model.grid().interpolate(&w, x0)
    );
    Ok(())
}

fn run_verify(path: &Path, cap_scale: f64) -> Result<(), Failure> {
    let run = config::load(path)?;
    let depth = run.config.horizon.unwrap_or(DEFAULT_VERIFY_DEPTH);
    let opts = VerifyOptions {
        model: Some(run.model.clone()),
        cap_scale,
        ..VerifyOptions::new(run.config.seed, depth, run.config.risk.clone())
    };
    let outcomes = verify::run(&opts)?;
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut failed = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        let mark = if o.passed() { "PASS" } else { "FAIL" };
        println!("{mark}  {:width$}  {:>6} cases  max error {:.3e}", o.name, o.cases, o.max_error);
        if let Some(cx) = &o.counterexample {
            failed.push((i, cx));
        }
    }
    if failed.is_empty() {
        return Ok(());
    }
    let out = &run.config.output_dir;
    prepare_output(out)?;
    let mut files = Vec::new();
    for (i, cx) in failed {
        let file = out.join(format!("counterexample_{i}.json"));
        tables::write_json(&file, cx)?;
        files.push(file.display().to_string());
    }
    Err(Failure::Mismatch(format!("counterexamples written to {}", files.join(", "))))
}

fn run_sweep(path: &Path, param: &str, values: &[f64]) -> Result<(), Failure> {
    let param: SweepParam = param.parse()?;
    let run = config::load(path)?;
    let rows = sweep(&run.problem, &run.model, param, values, &run.settings())?;
    let out = &run.config.output_dir;
    prepare_output(out)?;
    tables::write_sweep(&out.join("sweep.csv"), &rows)?;
    for r in &rows {
        println!("{:>8}  {:<22}  N0 {:>3}  sweeps {}", r.param, r.value, r.n0, r.sweeps);
    }
    if param == SweepParam::Alpha {
        let mut sorted = rows.clone();
        sorted.sort_by(|a, b| a.param.total_cmp(&b.param));
        if let Some(i) = first_decrease(&sorted, SWEEP_SLACK) {
            return Err(Failure::Mismatch(format!(
                "V*(x0) decreases from {} at alpha {} to {} at alpha {}",
                sorted[i - 1].value,
                sorted[i - 1].param,
                sorted[i].value,
                sorted[i].param
            )));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config } => solve(config),
        Command::Evaluate { config, policy } => evaluate(config, policy),
        Command::Verify { config, corrupt_cap } => run_verify(config, *corrupt_cap),
        Command::Sweep { config, param, values } => run_sweep(config, param, values),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riskdp: {e}");
            ExitCode::from(e.code())
        }
    }
}

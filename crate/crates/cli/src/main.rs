//! `sqlab`: batch front-end for dimension computations, audits, solver
//! experiments and report merging.

/// Returns a usage failure (exit status 1) from the enclosing function.
macro_rules! usage {
    ($($arg:tt)*) => {
        return Err($crate::Failure::Usage(anyhow::anyhow!($($arg)*)))
    };
}

mod config;
mod merge;
mod solve;

use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

use sqlab::dimension::{
    combined_relation_audit, crsd, det_cover, rsd_decision_auto, rsd_optimizing, rsd_search, rsd_verifiable, sd_decision,
    CoverMode,
};
use sqlab::games::Kappa;
use sqlab::problems::{line_audit, ProblemKind, ProblemSpec};

use config::{ExperimentConfig, RunArgs};

#[derive(Parser)]
#[command(name = "sqlab", version, about = "Statistical-query dimensions, audits and solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a statistical dimension of an instance.
    Dims(RunArgs),
    /// Check the correlation and norm bounds of an instance family.
    Audit(RunArgs),
    /// Run a solver over seeded trials.
    Solve(RunArgs),
    /// Merge JSON reports of one kind into a CSV summary.
    Merge(merge::MergeArgs),
}

/// How a command ended, mapped to the process exit status.
pub enum Failure {
    /// Malformed configuration, guard exceeded, unreadable input: exit 1.
    Usage(anyhow::Error),
    /// A proved bound was violated at runtime: exit 2.
    Violation(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Dims(args) => ExperimentConfig::resolve(args, "dims").and_then(|c| dims(&c)),
        Command::Audit(args) => ExperimentConfig::resolve(args, "audit").and_then(|c| audit(&c)),
        Command::Solve(args) => ExperimentConfig::resolve(args, "solve").and_then(|c| solve::run(&c)),
        Command::Merge(args) => merge::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("bound violated: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Writes `value` as pretty JSON to `--out`, or to stdout.
pub fn emit(cfg: &ExperimentConfig, value: &Value) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match &cfg.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// A report object tagged with its kind and instance name.
pub fn tagged(kind: &str, instance: &str, body: Value) -> Value {
    let mut map = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    map.insert("report".into(), Value::String(kind.into()));
    map.insert("instance".into(), Value::String(instance.into()));
    Value::Object(map)
}

fn default_dimension(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Decision | ProblemKind::Pac => "rsd",
        ProblemKind::Search => "search",
        ProblemKind::Verifiable => "verifiable",
        ProblemKind::Optimizing => "optimizing",
    }
}

fn reference(problem: &ProblemSpec) -> anyhow::Result<&sqlab::distributions::FiniteDistribution> {
    problem.reference.as_ref().ok_or_else(|| anyhow!("instance `{}` has no reference distribution", problem.name))
}

fn dims(cfg: &ExperimentConfig) -> Outcome<()> {
    let problem = cfg.problem()?;
    let tau = cfg.require_tau()?;
    let kappa = cfg.kappa()?;
    let which = cfg.param("dim").unwrap_or_else(|| default_dimension(problem.kind).to_string());
    if kappa == Kappa::Kv && !matches!(which.as_str(), "rsd" | "crsd") {
        usage!("--kappa kv applies to the rsd and crsd dimensions only");
    }
    let report = match which.as_str() {
        "rsd" => rsd_decision_auto(&problem.dists, reference(&problem)?, tau, kappa)?,
        "sd" => sd_decision(&problem.dists, reference(&problem)?, tau)?,
        "det" => det_cover(&problem.dists, reference(&problem)?, tau, CoverMode::Exact)?,
        "crsd" => crsd(&problem.dists, reference(&problem)?, kappa)?,
        "search" => {
            let alpha = cfg.alpha.ok_or_else(|| anyhow!("search dimensions need --alpha"))?;
            rsd_search(&problem, tau, alpha, None, None)?
        }
        "verifiable" => {
            let theta = cfg.theta.or(problem.threshold).ok_or_else(|| anyhow!("verifiable dimensions need --theta"))?;
            rsd_verifiable(&problem, theta, tau, None)?
        }
        "optimizing" => {
            let eps = cfg.eps.or(problem.eps).ok_or_else(|| anyhow!("optimizing dimensions need --eps"))?;
            let steps = cfg.param_usize("grid")?.unwrap_or(10).max(1);
            let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
            rsd_optimizing(&problem, eps, tau, &grid, None)?
        }
        other => usage!("unknown dimension `{other}` (rsd, sd, det, crsd, search, verifiable, optimizing)"),
    }
    .named(&problem.name);
    let name = report.instance.clone();
    emit(cfg, &tagged("dims", &name, serde_json::to_value(&report)?))
}

fn audit(cfg: &ExperimentConfig) -> Outcome<()> {
    if cfg.gen.as_deref() == Some("line") {
        let p = cfg.require_param_u64("p")?;
        let a = line_audit(p)?;
        let passed = a.passed();
        let mut body = serde_json::to_value(&a)?;
        body["passed"] = Value::Bool(passed);
        emit(cfg, &tagged("audit", &format!("line-p{p}"), body))?;
        if !passed {
            return Err(Failure::Violation(format!("line audit at p={p} failed: {:?}", a.checks)));
        }
        return Ok(());
    }
    let problem = cfg.problem()?;
    if problem.kind != ProblemKind::Decision {
        usage!("audit runs on the line family or on decision instances");
    }
    let a = combined_relation_audit(&problem.dists, reference(&problem)?)?;
    let passed = a.passed();
    let mut body = serde_json::to_value(&a)?;
    body["passed"] = Value::Bool(passed);
    emit(cfg, &tagged("audit", &problem.name, body))?;
    if !passed {
        return Err(Failure::Violation(format!("combined-dimension relation failed on {}", problem.name)));
    }
    Ok(())
}

//! Command-line flags, the JSON config file, and the merged experiment
//! configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sqlab::games::Kappa;
use sqlab::problems::{biclique_decision, biclique_search, biclique_verifiable, line_family, spike_family, Marginal, ProblemSpec};

use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleName {
    Stat,
    Vstat,
    Vroot,
    Onestat,
}

impl OracleName {
    pub fn name(self) -> &'static str {
        match self {
            OracleName::Stat => "stat",
            OracleName::Vstat => "vstat",
            OracleName::Vroot => "vroot",
            OracleName::Onestat => "onestat",
        }
    }
}

fn parse_param(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    if k.is_empty() {
        return Err(format!("empty key in `{s}`"));
    }
    Ok((k.to_string(), v.to_string()))
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Instance generator: line, biclique or spike.
    #[arg(long)]
    pub gen: Option<String>,
    /// Problem instance JSON.
    #[arg(long, conflicts_with = "gen")]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_enum)]
    pub oracle: Option<OracleName>,
    /// Generator or solver parameter, `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub param: Vec<(String, String)>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with the same keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shorthand for `--param p=…`.
    #[arg(long)]
    pub p: Option<u64>,
    /// Shorthand for `--param n=…`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Shorthand for `--param k=…`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Shorthand for `--param kappa=…` (k1 or kv).
    #[arg(long)]
    pub kappa: Option<String>,
}

/// Everything a command needs, after merging the config file and flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<String>,
    pub gen: Option<String>,
    pub instance: Option<PathBuf>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub theta: Option<f64>,
    pub oracle: Option<OracleName>,
    #[serde(default)]
    pub param: BTreeMap<String, Value>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl ExperimentConfig {
    pub fn resolve(args: RunArgs, command: &str) -> Outcome<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str::<ExperimentConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(c) = &cfg.command {
            if c != command {
                usage!("config file is for `{c}`, not `{command}`");
            }
        }
        cfg.command = Some(command.to_string());
        macro_rules! overlay {
            ($($f:ident),*) => { $( if args.$f.is_some() { cfg.$f = args.$f.clone(); } )* };
        }
        overlay!(gen, instance, tau, delta, alpha, beta, eps, theta, oracle, trials, seed, out);
        if args.gen.is_some() {
            cfg.instance = None;
        } else if args.instance.is_some() {
            cfg.gen = None;
        }
        for (k, v) in args.param {
            cfg.param.insert(k, Value::String(v));
        }
        let shorthand = [
            ("p", args.p.map(|v| v.to_string())),
            ("n", args.n.map(|v| v.to_string())),
            ("k", args.k.map(|v| v.to_string())),
            ("kappa", args.kappa),
        ];
        for (k, v) in shorthand {
            if let Some(v) = v {
                cfg.param.insert(k.to_string(), Value::String(v));
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Outcome<()> {
        let command = self.command.as_deref().unwrap_or("");
        if self.gen.is_some() && self.instance.is_some() {
            usage!("give either --gen or --instance, not both");
        }
        if self.gen.is_none() && self.instance.is_none() {
            usage!("`{command}` needs --gen or --instance");
        }
        if self.trials.unwrap_or(1) > 1 && self.seed.is_none() {
            usage!("--seed is required when --trials exceeds 1");
        }
        if self.trials == Some(0) {
            usage!("--trials must be positive");
        }
        for (name, v) in [("tau", self.tau), ("delta", self.delta), ("alpha", self.alpha), ("beta", self.beta), ("eps", self.eps)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    usage!("--{name} must be a positive number, got {v}");
                }
            }
        }
        Ok(())
    }

    pub fn param(&self, key: &str) -> Option<String> {
        self.param.get(key).map(value_text)
    }

    pub fn param_usize(&self, key: &str) -> anyhow::Result<Option<usize>> {
        self.param(key).map(|v| v.parse().with_context(|| format!("parameter {key}={v} is not a count"))).transpose()
    }

    pub fn require_param_usize(&self, key: &str) -> anyhow::Result<usize> {
        self.param_usize(key)?.ok_or_else(|| anyhow!("missing parameter `{key}` (use --{key} or --param {key}=…)"))
    }

    pub fn require_param_u64(&self, key: &str) -> anyhow::Result<u64> {
        Ok(self.require_param_usize(key)? as u64)
    }

    pub fn require_tau(&self) -> anyhow::Result<f64> {
        self.tau.ok_or_else(|| anyhow!("`{}` needs --tau", self.command.as_deref().unwrap_or("")))
    }

    pub fn kappa(&self) -> anyhow::Result<Kappa> {
        match self.param("kappa").as_deref() {
            None | Some("k1") => Ok(Kappa::K1),
            Some("kv") => Ok(Kappa::Kv),
            Some(other) => Err(anyhow!("unknown kappa `{other}` (k1 or kv)")),
        }
    }

    pub fn instance_source(&self) -> String {
        match (&self.gen, &self.instance) {
            (Some(g), _) => g.clone(),
            (_, Some(p)) => p.display().to_string(),
            _ => String::new(),
        }
    }

    /// Builds the problem from the generator or the instance file.
    pub fn problem(&self) -> Outcome<ProblemSpec> {
        if let Some(path) = &self.instance {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(ProblemSpec::from_json(&text)?);
        }
        let gen = self.gen.as_deref().unwrap_or("");
        let problem = match gen {
            "line" => {
                let p = self.require_param_u64("p")?;
                let marginal = match self.param("marginal").as_deref() {
                    None | Some("uniform") => Marginal::Uniform,
                    Some("skewed") => Marginal::Skewed,
                    Some(other) => usage!("unknown marginal `{other}` (uniform or skewed)"),
                };
                line_family(p, marginal, self.eps.unwrap_or(0.1))?
            }
            "biclique" => {
                let n = self.require_param_usize("n")?;
                let k = self.require_param_usize("k")?;
                match self.param("problem").as_deref() {
                    None | Some("search") => biclique_search(n, k)?,
                    Some("decision") => biclique_decision(n, k)?,
                    Some("verifiable") => biclique_verifiable(n, k, self.theta)?,
                    Some(other) => usage!("unknown bi-clique problem `{other}` (search, decision, verifiable)"),
                }
            }
            "spike" => spike_family(self.require_param_usize("k")?)?,
            other => usage!("unknown generator `{other}` (line, biclique, spike)"),
        };
        Ok(problem)
    }
}

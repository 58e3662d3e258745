//! `merge`: one CSV row per JSON report, with a fixed column set per kind.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use serde_json::Value;

use crate::{write_file, Outcome};

#[derive(Debug, Clone, Args)]
pub struct MergeArgs {
    /// JSON reports written by `dims`, `audit` or `solve`.
    pub paths: Vec<PathBuf>,
    /// Report kind, needed only to pick the header when no paths are given.
    #[arg(long, default_value = "dims")]
    pub kind: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn columns(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "dims" => &["instance", "kind", "kappa", "tau", "value", "exactness"],
        "audit" => &["instance", "passed", "crsd", "rho", "rho_bound", "kbar1_bound"],
        "solve" => &[
            "instance",
            "solver",
            "oracle",
            "answers",
            "tau",
            "delta",
            "trials",
            "seed",
            "successes",
            "success_rate",
            "violations",
            "mean_queries",
            "mean_updates",
            "max_updates",
            "update_budget",
        ],
        _ => return None,
    })
}

/// `%.17g`: 17 significant digits, trailing zeros dropped.
pub fn format_double(v: f64) -> String {
    if !v.is_finite() {
        return sqlab::report::extended_name(v).to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..17).contains(&exp) {
        trim(format!("{v:.*}", (16 - exp) as usize))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa.to_string()), exp.abs())
    }
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::Bool(b)) => b.to_string(),
        Some(Value::Number(n)) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.to_string(),
            (_, Some(u)) => u.to_string(),
            _ => format_double(n.as_f64().unwrap_or(f64::NAN)),
        },
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

pub fn run(args: &MergeArgs) -> Outcome<()> {
    let mut reports = Vec::new();
    for path in &args.paths {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let kind = v.get("report").and_then(Value::as_str).ok_or_else(|| anyhow!("{} is not a report", path.display()))?;
        reports.push((kind.to_string(), v));
    }
    let kind = reports.first().map(|(k, _)| k.clone()).unwrap_or_else(|| args.kind.clone());
    if let Some((other, _)) = reports.iter().find(|(k, _)| *k != kind) {
        usage!("cannot merge `{kind}` and `{other}` reports");
    }
    let cols = columns(&kind).ok_or_else(|| anyhow!("unknown report kind `{kind}`"))?;
    let mut rows: Vec<Vec<String>> =
        reports.iter().map(|(_, v)| cols.iter().map(|c| cell(v.get(*c))).collect()).collect();
    rows.sort_by(|a, b| a[0].cmp(&b[0]));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(cols.iter()).map_err(|e| anyhow!(e))?;
    for r in &rows {
        w.write_record(r).map_err(|e| anyhow!(e))?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?).map_err(|e| anyhow!(e))?;
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::format_double;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_double(0.2), "0.20000000000000001");
        assert_eq!(format_double(3.0), "3");
        assert_eq!(format_double(0.4375), "0.4375");
        assert_eq!(format_double(1e-7), "9.9999999999999995e-08");
        assert_eq!(format_double(1e20), "1e+20");
        assert_eq!(format_double(-2.5), "-2.5");
        assert_eq!(format_double(f64::INFINITY), "inf");
        for v in [0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 123456.789] {
            assert_eq!(format_double(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}

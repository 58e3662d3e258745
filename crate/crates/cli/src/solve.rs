//! `solve`: seeded solver trials with per-trial rows and a summary report.

use anyhow::anyhow;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sqlab::dimension::rsd_decision_auto;
use sqlab::distributions::{kl_radius_upper, FiniteDistribution, QueryFn, RangeTag};
use sqlab::games::Kappa;
use sqlab::oracles::{derived_rng, AnswerStrategy, EdgeDirection, OracleSession, OracleSpec, SqRng};
use sqlab::problems::{LinePInstance, Marginal, ProblemKind, ProblemSpec};
use sqlab::solvers::{
    hypothesis_error, line_p_learn, line_query_bound, solve_decision_sampled, solve_optimizing, solve_search_universal,
    solve_verifiable, sampled_query_count, Decision, GreedyCoverOracle, QueryMeasure, RunOutcome, RunReport, SearchMode,
    SolverConfig,
};
use sqlab::streaming::{iid_stream, stream_solve};

use crate::config::{ExperimentConfig, OracleName};
use crate::merge::format_double;
use crate::{emit, tagged, write_file, Failure, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SolverName {
    Universal,
    Stream,
    Verifiable,
    Optimizing,
    Decision,
    Line,
}

impl SolverName {
    fn parse(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "universal" => SolverName::Universal,
            "stream" => SolverName::Stream,
            "verifiable" => SolverName::Verifiable,
            "optimizing" => SolverName::Optimizing,
            "decision" => SolverName::Decision,
            "line" => SolverName::Line,
            other => {
                return Err(anyhow!("unknown solver `{other}` (universal, stream, verifiable, optimizing, decision, line)"))
            }
        })
    }

    fn name(self) -> &'static str {
        match self {
            SolverName::Universal => "universal",
            SolverName::Stream => "stream",
            SolverName::Verifiable => "verifiable",
            SolverName::Optimizing => "optimizing",
            SolverName::Decision => "decision",
            SolverName::Line => "line",
        }
    }

    fn default_for(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Decision => SolverName::Decision,
            ProblemKind::Search | ProblemKind::Pac => SolverName::Universal,
            ProblemKind::Verifiable => SolverName::Verifiable,
            ProblemKind::Optimizing => SolverName::Optimizing,
        }
    }
}

/// One row of the per-trial CSV.
#[derive(Debug, Clone, Serialize)]
struct TrialRow {
    trial: usize,
    target: String,
    outcome: String,
    correct: bool,
    queries: usize,
    updates: usize,
    update_budget: usize,
    valid_answer_fraction: String,
    persistent_bits: Option<u64>,
    samples: Option<u64>,
    within_bound: Option<bool>,
    #[serde(skip)]
    violation: Option<String>,
}

/// Everything shared by the trials of one experiment.
struct Setup {
    problem: ProblemSpec,
    solver: SolverName,
    oracle: OracleName,
    answers: String,
    tau: f64,
    delta: f64,
    kappa: Kappa,
    mode: SearchMode,
    project: bool,
    theta: Option<f64>,
    eps: Option<f64>,
    fixed_target: Option<usize>,
    /// Upper bound on oracle calls per trial, for the sampled-answer size.
    query_allowance: f64,
    decision_cover: Option<(QueryMeasure, f64)>,
    line: Option<(u64, Vec<f64>)>,
}

fn outcome_name(o: &RunOutcome) -> String {
    match o {
        RunOutcome::Solution { name, .. } => format!("solution:{name}"),
        RunOutcome::Decision { decision } => format!("decision:{}", decision_name(*decision)),
        RunOutcome::Failure { .. } => "failure".into(),
        RunOutcome::TheoremViolation { .. } => "theorem_violation".into(),
    }
}

fn decision_name(d: Decision) -> &'static str {
    match d {
        Decision::Reference => "reference",
        Decision::InClass => "in_class",
    }
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Outcome<Self> {
        let problem = cfg.problem()?;
        let tau = cfg.require_tau()?;
        let delta = cfg.delta.unwrap_or(0.1);
        if delta >= 1.0 {
            usage!("--delta must be below 1");
        }
        let solver = match cfg.param("solver") {
            Some(s) => SolverName::parse(&s)?,
            None => SolverName::default_for(problem.kind),
        };
        let oracle = cfg.oracle.unwrap_or(OracleName::Stat);
        let mut kappa = cfg.kappa()?;
        match oracle {
            OracleName::Stat => {}
            OracleName::Vroot if solver == SolverName::Universal => kappa = Kappa::Kv,
            other => usage!("solver `{}` does not run on a {} oracle", solver.name(), other.name()),
        }
        if kappa == Kappa::Kv && oracle != OracleName::Vroot {
            usage!("--kappa kv needs --oracle vroot");
        }
        let mode = match cfg.param("mode").as_deref() {
            None | Some("det") => SearchMode::Det,
            Some("rand") => SearchMode::Rand { delta },
            Some(other) => usage!("unknown mode `{other}` (det or rand)"),
        };
        let project = match cfg.param("project").as_deref() {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => usage!("project must be true or false, got `{other}`"),
        };
        let answers = cfg.param("answers").unwrap_or_else(|| "sampled".into());
        if !matches!(answers.as_str(), "exact" | "sampled" | "edge-up" | "edge-down" | "reference") {
            usage!("unknown answers `{answers}` (exact, sampled, edge-up, edge-down, reference)");
        }
        let fixed_target = cfg.param_usize("target")?;
        if let Some(t) = fixed_target {
            if t >= problem.dists.len() {
                usage!("target {t} out of range: the instance has {} distributions", problem.dists.len());
            }
        }
        let (kl, _) = kl_radius_upper(&problem.dists)?;
        let cfg_solver = SolverConfig { tau, kappa, mode, project };
        let rounds = cfg_solver.update_budget(kl) as f64 + 1.0;
        let m = problem.dists.len() as f64;
        let mut setup = Setup {
            solver,
            oracle,
            answers,
            tau,
            delta,
            kappa,
            mode,
            project,
            theta: cfg.theta.or(problem.threshold),
            eps: cfg.eps.or(problem.eps),
            fixed_target,
            query_allowance: rounds * m,
            decision_cover: None,
            line: None,
            problem,
        };
        match solver {
            SolverName::Optimizing => setup.query_allowance *= (4.0 / tau).log2().ceil() + 1.0,
            SolverName::Decision => setup.prepare_decision()?,
            SolverName::Line => setup.prepare_line(cfg)?,
            SolverName::Verifiable if setup.theta.is_none() => usage!("verifiable solving needs --theta"),
            _ => {}
        }
        if solver == SolverName::Stream && setup.answers != "sampled" {
            usage!("the streaming solver reads samples; --param answers does not apply");
        }
        Ok(setup)
    }

    fn prepare_decision(&mut self) -> Outcome<()> {
        let d0 = self.problem.reference.as_ref().ok_or_else(|| anyhow!("decision solving needs a reference"))?;
        let report = rsd_decision_auto(&self.problem.dists, d0, self.tau, Kappa::K1)?;
        if report.is_infinite() {
            usage!("no randomized cover exists at τ={}: some distribution is inseparable from the reference", self.tau);
        }
        let sets = report.certificate.cover.clone().unwrap_or_default();
        let weights = report.certificate.cover_weights.clone().unwrap_or_default();
        let queries = sets
            .iter()
            .map(|s| QueryFn::new(self.problem.domain().clone(), s.witness.clone(), RangeTag::Signed))
            .collect::<sqlab::Result<Vec<_>>>()?;
        let d = report.value.max(1.0);
        self.query_allowance = sampled_query_count(d, self.delta) as f64;
        self.decision_cover = Some((QueryMeasure::new(queries, weights)?, d));
        Ok(())
    }

    fn prepare_line(&mut self, cfg: &ExperimentConfig) -> Outcome<()> {
        if cfg.gen.as_deref() != Some("line") {
            usage!("the line learner runs on --gen line");
        }
        let eps = self.eps.ok_or_else(|| anyhow!("the line learner needs --eps"))?;
        let p = cfg.require_param_u64("p")?;
        let n = (p * p) as usize;
        let marginal = match cfg.param("marginal").as_deref() {
            Some("skewed") => LinePInstance::new(p, (0, 0), Marginal::Skewed)?
                .marginal_distribution(&sqlab::problems::line_base_domain(p)?)?
                .weights()
                .to_vec(),
            _ => vec![1.0 / n as f64; n],
        };
        self.query_allowance = line_query_bound(eps);
        self.line = Some((p, marginal));
        Ok(())
    }

    /// Oracle tolerance the solver requires.
    fn tolerance(&self) -> f64 {
        match self.solver {
            SolverName::Optimizing => self.tau / 4.0,
            SolverName::Decision => self.tau / 2.0,
            SolverName::Line => self.eps.map(|e| e * e / 13.0).unwrap_or(self.tau),
            _ => self.tau / 3.0,
        }
    }

    fn spec(&self) -> sqlab::Result<OracleSpec> {
        match self.oracle {
            OracleName::Vroot => OracleSpec::vroot(self.tolerance()),
            _ => OracleSpec::stat(self.tolerance()),
        }
    }

    /// Samples per sampled answer so that every answer of a trial is within
    /// tolerance with probability at least `1 − δ`.
    fn samples_per_answer(&self) -> usize {
        let t = self.tolerance();
        let log = (2.0 * self.query_allowance.max(1.0) / self.delta).ln();
        let k = match self.oracle {
            OracleName::Vroot => log / (2.0 * t.powi(4)),
            _ => 2.0 * log / (t * t),
        };
        k.ceil() as usize
    }

    fn session(&self, target: &FiniteDistribution, rng: &mut SqRng) -> sqlab::Result<OracleSession> {
        let strategy = match self.answers.as_str() {
            "exact" => AnswerStrategy::Exact,
            "edge-up" => AnswerStrategy::Edge(EdgeDirection::Up),
            "edge-down" => AnswerStrategy::Edge(EdgeDirection::Down),
            "reference" => AnswerStrategy::Reference(
                self.problem.reference.clone().unwrap_or_else(|| FiniteDistribution::uniform(target.domain().clone())),
            ),
            _ => AnswerStrategy::Sampled(self.samples_per_answer()),
        };
        OracleSession::new(self.spec()?, strategy, target.clone(), Some(SqRng::seed_from_u64(rng.random())))
    }

    fn run_trial(&self, trial: usize, seed: u64) -> sqlab::Result<TrialRow> {
        let mut rng = derived_rng(seed, trial as u64);
        let m = self.problem.dists.len();
        if self.solver == SolverName::Decision {
            return self.decision_trial(trial, &mut rng);
        }
        let target = self.fixed_target.unwrap_or_else(|| rng.random_range(0..m));
        let d = &self.problem.dists[target];
        let target_name = format!("#{target}");
        let oracle = GreedyCoverOracle;
        let report: RunReport = match self.solver {
            SolverName::Universal => {
                let cfg = SolverConfig { tau: self.tau, kappa: self.kappa, mode: self.mode, project: self.project };
                let mut session = self.session(d, &mut rng)?;
                solve_search_universal(&self.problem, &oracle, &cfg, &mut session, Some(&mut rng))?
            }
            SolverName::Verifiable => {
                let mut session = self.session(d, &mut rng)?;
                solve_verifiable(&self.problem, &oracle, self.theta.unwrap_or(1.0), self.tau, &mut session)?
            }
            SolverName::Optimizing => {
                let mut session = self.session(d, &mut rng)?;
                solve_optimizing(&self.problem, &oracle, self.tau, &mut session)?
            }
            SolverName::Stream => {
                let stream_seed: u64 = rng.random();
                let mut stream = iid_stream(d, SqRng::seed_from_u64(stream_seed))?;
                let run = stream_solve(&self.problem, &oracle, self.tau, self.delta, &mut stream, Some(stream_seed))?;
                let correct = matches!(run.outcome, RunOutcome::Solution { index, .. } if self.problem.is_valid(index, target));
                let violation = (!run.ledger.within_bound).then(|| format!("trial {trial}: bit ledger {:?} out of bounds", run.ledger));
                return Ok(TrialRow {
                    trial,
                    target: target_name,
                    outcome: outcome_name(&run.outcome),
                    correct,
                    queries: 0,
                    updates: run.updates,
                    update_budget: run.update_budget,
                    valid_answer_fraction: String::new(),
                    persistent_bits: Some(run.ledger.persistent_bits),
                    samples: Some(run.ledger.samples_consumed),
                    within_bound: Some(run.ledger.within_bound),
                    violation,
                });
            }
            SolverName::Line => return self.line_trial(trial, target, &mut rng),
            SolverName::Decision => unreachable!(),
        };
        let correct = match report.outcome {
            RunOutcome::Solution { index, .. } => match self.solver {
                SolverName::Verifiable => {
                    let q = &self.problem.verify.as_ref().expect("checked by the solver")[index];
                    sqlab::distributions::expectation(d, q)? <= self.theta.unwrap_or(1.0) + self.tau
                }
                _ => self.problem.is_valid(index, target),
            },
            _ => false,
        };
        let violation = report.is_violation().then(|| format!("trial {trial}: {:?}", report.outcome));
        Ok(TrialRow {
            trial,
            target: target_name,
            outcome: outcome_name(&report.outcome),
            correct,
            queries: report.queries,
            updates: report.updates,
            update_budget: report.update_budget,
            valid_answer_fraction: format_double(report.valid_answer_fraction),
            persistent_bits: None,
            samples: None,
            within_bound: None,
            violation,
        })
    }

    fn decision_trial(&self, trial: usize, rng: &mut SqRng) -> sqlab::Result<TrialRow> {
        let (cover, d) = self.decision_cover.as_ref().expect("prepared");
        let d0 = self.problem.reference.as_ref().expect("prepared");
        let m = self.problem.dists.len();
        let pick = self.fixed_target.unwrap_or_else(|| if rng.random_bool(0.5) { m } else { rng.random_range(0..m) });
        let (target, name) = if pick == m { (d0, "reference".to_string()) } else { (&self.problem.dists[pick], format!("#{pick}")) };
        let mut session = self.session(target, rng)?;
        let run = solve_decision_sampled(cover, *d, d0, self.tau, self.delta, &mut session, rng)?;
        let correct = (run.decision == Decision::InClass) == (pick != m);
        Ok(TrialRow {
            trial,
            target: name,
            outcome: outcome_name(&RunOutcome::Decision { decision: run.decision }),
            correct,
            queries: run.queries,
            updates: 0,
            update_budget: 0,
            valid_answer_fraction: format_double(session.transcript().valid_fraction()),
            persistent_bits: None,
            samples: None,
            within_bound: None,
            violation: None,
        })
    }

    fn line_trial(&self, trial: usize, target: usize, rng: &mut SqRng) -> sqlab::Result<TrialRow> {
        let (p, marginal) = self.line.as_ref().expect("prepared");
        let eps = self.eps.expect("prepared");
        let d = &self.problem.dists[target];
        let mut session = self.session(d, rng)?;
        let h = line_p_learn(*p, marginal, eps, &mut session)?;
        let err = hypothesis_error(&h.labels, d);
        let all_valid = session.transcript().all_valid();
        let violation = (all_valid && (err > eps || h.queries as f64 > line_query_bound(eps)))
            .then(|| format!("trial {trial}: error {err} or {} queries out of bounds with valid answers", h.queries));
        Ok(TrialRow {
            trial,
            target: format!("#{target}"),
            outcome: match h.line {
                Some((a, b)) => format!("line({a},{b})"),
                None => "heavy-set".into(),
            },
            correct: err <= eps,
            queries: h.queries,
            updates: 0,
            update_budget: 0,
            valid_answer_fraction: format_double(session.transcript().valid_fraction()),
            persistent_bits: None,
            samples: None,
            within_bound: None,
            violation,
        })
    }
}

pub fn run(cfg: &ExperimentConfig) -> Outcome<()> {
    let setup = Setup::new(cfg)?;
    let trials = cfg.trials.unwrap_or(1);
    let seed = cfg.seed.unwrap_or(0);
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| setup.run_trial(t, seed))
        .collect::<sqlab::Result<Vec<_>>>()?;
    let successes = rows.iter().filter(|r| r.correct).count();
    let violations: Vec<&String> = rows.iter().filter_map(|r| r.violation.as_ref()).collect();
    let mean = |f: &dyn Fn(&TrialRow) -> usize| rows.iter().map(f).sum::<usize>() as f64 / trials as f64;
    let summary = json!({
        "solver": setup.solver.name(),
        "oracle": setup.oracle.name(),
        "answers": setup.answers,
        "source": cfg.instance_source(),
        "tau": setup.tau,
        "delta": setup.delta,
        "trials": trials,
        "seed": cfg.seed,
        "successes": successes,
        "success_rate": successes as f64 / trials as f64,
        "violations": violations.len(),
        "mean_queries": mean(&|r| r.queries),
        "mean_updates": mean(&|r| r.updates),
        "max_updates": rows.iter().map(|r| r.updates).max().unwrap_or(0),
        "update_budget": rows.iter().map(|r| r.update_budget).max().unwrap_or(0),
    });
    emit(cfg, &tagged("solve", &setup.problem.name, summary))?;
    if let Some(out) = &cfg.out {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).map_err(|e| anyhow!("writing trial rows: {e}"))?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("writing trial rows: {e}"))?;
        write_file(&out.with_extension("trials.csv"), &String::from_utf8(bytes).map_err(|e| anyhow!(e))?)?;
    }
    if let Some(first) = violations.first() {
        return Err(Failure::Violation(format!("{} trial(s) violated a proved bound; first: {first}", violations.len())));
    }
    Ok(())
}

//! Multiplicative weights and the solvers built on it: sampled-cover
//! decision, universal search (deterministic and randomized), verifiable
//! search, optimizing search by bisection, and the Line_p learner.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use serde::Serialize;

use crate::distributions::{dot, kl_radius_upper, same_domain, FiniteDistribution, FiniteDomain, QueryFn, RangeTag};
use crate::error::{Result, SqError};
use crate::games::{best_single_discrimination, discrimination, lp_solve, Kappa, LinearProgram, Relation, ACHIEVE_SLACK};
use crate::oracles::{OracleKind, OracleSession, SqRng};
use crate::problems::{LinePInstance, Marginal, ProblemSpec};

// ---------------------------------------------------------------------------
// Multiplicative weights

/// Weights, step size and the loss history of one MW run.
#[derive(Debug, Clone)]
pub struct MwState {
    initial: Vec<f64>,
    weights: Vec<f64>,
    gamma: f64,
    losses: Vec<Vec<f64>>,
    /// `Σ_t ⟨w_t, z_t⟩`.
    learner_total: f64,
    /// `Σ_t z_t` per coordinate.
    totals: Vec<f64>,
}

impl MwState {
    pub fn new(initial: Vec<f64>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(SqError::InvalidArgument(format!("MW step must lie in (0, 1), got {gamma}")));
        }
        if initial.is_empty() || initial.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(SqError::InvalidDistribution("MW weights must be finite and non-negative".into()));
        }
        let total: f64 = initial.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SqError::InvalidDistribution(format!("MW weights sum to {total}")));
        }
        let m = initial.len();
        Ok(MwState { weights: initial.clone(), initial, gamma, losses: Vec::new(), learner_total: 0.0, totals: vec![0.0; m] })
    }

    pub fn uniform(m: usize, gamma: f64) -> Result<Self> {
        MwState::new(vec![1.0 / m.max(1) as f64; m], gamma)
    }

    /// `ŵ_i = w_i (1 − γ z_i)`, then `w = ŵ / ‖ŵ‖₁`.
    pub fn update(&mut self, z: &[f64]) -> Result<()> {
        if z.len() != self.weights.len() {
            return Err(SqError::InvalidArgument("loss vector length differs from the weights".into()));
        }
        if let Some(i) = z.iter().position(|v| !(v.abs() <= 1.0)) {
            return Err(SqError::RangeViolation { index: i, value: z[i], range: "[-1, 1]" });
        }
        self.learner_total += dot(&self.weights, z);
        for (t, v) in self.totals.iter_mut().zip(z) {
            *t += v;
        }
        let mut next: Vec<f64> = self.weights.iter().zip(z).map(|(w, v)| w * (1.0 - self.gamma * v)).collect();
        let norm: f64 = next.iter().sum();
        for w in &mut next {
            *w /= norm;
        }
        self.weights = next;
        self.losses.push(z.to_vec());
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn updates(&self) -> usize {
        self.losses.len()
    }

    pub fn losses(&self) -> &[Vec<f64>] {
        &self.losses
    }

    /// `(1/T) Σ_t (⟨w_t, z_t⟩ − ⟨u, z_t⟩)`; zero before the first update.
    pub fn average_regret(&self, comparator: &[f64]) -> f64 {
        if self.losses.is_empty() {
            return 0.0;
        }
        (self.learner_total - dot(comparator, &self.totals)) / self.losses.len() as f64
    }

    /// Average regret against the best single coordinate.
    pub fn max_pure_regret(&self) -> f64 {
        if self.losses.is_empty() {
            return 0.0;
        }
        let best = self.totals.iter().copied().fold(f64::INFINITY, f64::min);
        (self.learner_total - best) / self.losses.len() as f64
    }

    /// `KL(u ‖ w¹)/(γT) + γ`, which bounds the average regret against `u`
    /// for any number of steps `T ≥ 1`.
    pub fn regret_bound(&self, comparator: &[f64]) -> f64 {
        let kl: f64 = comparator
            .iter()
            .zip(&self.initial)
            .filter(|(u, _)| **u > 0.0)
            .map(|(u, w)| u * (u / w).ln())
            .sum();
        kl / (self.gamma * self.losses.len().max(1) as f64) + self.gamma
    }
}

/// Runs `steps` updates, drawing the loss of step `t` from `loss_source(t, w_t)`.
pub fn mw_run<F>(initial: Vec<f64>, gamma: f64, mut loss_source: F, steps: usize) -> Result<MwState>
where
    F: FnMut(usize, &[f64]) -> Vec<f64>,
{
    let mut state = MwState::new(initial, gamma)?;
    for t in 0..steps {
        let z = loss_source(t, state.weights());
        state.update(&z)?;
    }
    Ok(state)
}

/// Replays MW updates with the recorded queries `ψ_t` as losses, returning
/// every intermediate distribution `D_1, …, D_{T+1}`.
pub fn replay_distributions(start: &[f64], gamma: f64, psis: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut state = MwState::new(start.to_vec(), gamma)?;
    let mut out = vec![state.weights().to_vec()];
    for psi in psis {
        state.update(psi)?;
        out.push(state.weights().to_vec());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sampled-cover decision

/// A probability measure over queries.
#[derive(Debug, Clone)]
pub struct QueryMeasure {
    queries: Vec<QueryFn>,
    weights: Vec<f64>,
}

impl QueryMeasure {
    pub fn new(queries: Vec<QueryFn>, weights: Vec<f64>) -> Result<Self> {
        if queries.is_empty() || queries.len() != weights.len() {
            return Err(SqError::InvalidArgument("cover measure needs one weight per query".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(SqError::InvalidDistribution("cover weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(SqError::InvalidDistribution("cover weights sum to zero".into()));
        }
        if queries.iter().any(|q| !same_domain(q.domain(), queries[0].domain())) {
            return Err(SqError::DomainMismatch("cover queries live on different domains".into()));
        }
        Ok(QueryMeasure { queries, weights: weights.iter().map(|w| w / total).collect() })
    }

    pub fn uniform(queries: Vec<QueryFn>) -> Result<Self> {
        let n = queries.len();
        QueryMeasure::new(queries, vec![1.0; n])
    }

    pub fn queries(&self) -> &[QueryFn] {
        &self.queries
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &QueryFn {
        let w = WeightedIndex::new(&self.weights).expect("weights validated at construction");
        &self.queries[w.sample(rng)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// No sampled query moved away from the reference.
    Reference,
    InClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecisionRun {
    pub decision: Decision,
    pub queries: usize,
}

/// `⌈d ln(1/δ)⌉`, at least one query.
pub fn sampled_query_count(d: f64, delta: f64) -> usize {
    ((d * (1.0 / delta).ln()).ceil() as usize).max(1)
}

/// Samples `⌈d ln(1/δ)⌉` queries from `cover` and reports membership in the
/// class as soon as one answer is more than `τ/2` from the reference value.
/// All sampled queries are asked.
pub fn solve_decision_sampled<R: Rng + ?Sized>(
    cover: &QueryMeasure,
    d: f64,
    reference: &FiniteDistribution,
    tau: f64,
    delta: f64,
    session: &mut OracleSession,
    rng: &mut R,
) -> Result<DecisionRun> {
    if !(d >= 1.0) || !d.is_finite() {
        return Err(SqError::InvalidArgument(format!("cover dimension must be a finite value ≥ 1, got {d}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SqError::InvalidArgument(format!("δ must lie in (0, 1), got {delta}")));
    }
    session.require_tolerance(OracleKind::Stat, tau / 2.0)?;
    let s = sampled_query_count(d, delta);
    let mut decision = Decision::Reference;
    for _ in 0..s {
        let phi = cover.sample(rng);
        let v = session.ask(phi)?;
        if (v - dot(reference.weights(), phi.values())).abs() > tau / 2.0 {
            decision = Decision::InClass;
        }
    }
    Ok(DecisionRun { decision, queries: s })
}

// ---------------------------------------------------------------------------
// Cover oracles

/// Queries separating a set of class members from a current distribution.
#[derive(Debug, Clone, Default)]
pub struct Separation {
    /// Queries that separate at margin `τ`, in the order they are asked.
    pub queries: Vec<QueryFn>,
    /// For randomized use: weights of a fractional cover over `queries`
    /// (sum = the cover value `d`).
    pub fractional: Option<Vec<f64>>,
    /// Best-effort witnesses for members no single query separates.
    pub extra: Vec<QueryFn>,
    pub uncoverable: Vec<usize>,
}

/// A candidate solution for the current distribution and the queries that
/// would refute it.
#[derive(Debug, Clone)]
pub struct CoverPlan {
    pub solution: usize,
    pub separation: Separation,
}

impl CoverPlan {
    pub fn all_queries(&self) -> impl Iterator<Item = &QueryFn> {
        self.separation.queries.iter().chain(&self.separation.extra)
    }
}

/// Supplies, for the current MW distribution `D_t`, a solution and queries
/// distinguishing the distributions it does not solve.
pub trait CoverOracle {
    fn plan(&self, problem: &ProblemSpec, dt: &[f64], tau: f64, kappa: Kappa, fractional: bool) -> Result<CoverPlan>;

    fn separate(
        &self,
        problem: &ProblemSpec,
        members: &[usize],
        dt: &[f64],
        tau: f64,
        kappa: Kappa,
        fractional: bool,
    ) -> Result<Separation>;
}

/// Uses each member's own best single witness as the candidate queries and
/// covers greedily (or by the fractional LP for randomized runs).
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyCoverOracle;

fn witness_query(problem: &ProblemSpec, kappa: Kappa, values: Vec<f64>) -> Result<QueryFn> {
    let range = match kappa {
        Kappa::K1 => RangeTag::Signed,
        Kappa::Kv => RangeTag::Unit,
    };
    QueryFn::new(problem.domain().clone(), values, range)
}

fn separates(kappa: Kappa, d: &[f64], dt: &[f64], phi: &[f64], tau: f64) -> bool {
    discrimination(kappa, d, dt, phi) >= tau + ACHIEVE_SLACK
}

impl CoverOracle for GreedyCoverOracle {
    fn plan(&self, problem: &ProblemSpec, dt: &[f64], tau: f64, kappa: Kappa, fractional: bool) -> Result<CoverPlan> {
        let m = problem.dists.len();
        let gaps: Vec<f64> =
            problem.dists.iter().map(|d| best_single_discrimination(kappa, d.weights(), dt).0).collect();
        let coverable: Vec<bool> = gaps.iter().map(|g| *g >= tau + ACHIEVE_SLACK).collect();
        let nearest = (0..m).min_by(|&a, &b| gaps[a].total_cmp(&gaps[b])).unwrap_or(0);
        let solution = (0..problem.solutions.len())
            .min_by_key(|&f| {
                let unsolved = (0..m).filter(|&i| !problem.is_valid(f, i));
                let stuck = unsolved.clone().filter(|&i| !coverable[i]).count();
                (stuck, !problem.is_valid(f, nearest), unsolved.count(), f)
            })
            .ok_or_else(|| SqError::InvalidProblem("problem has no solutions".into()))?;
        let members: Vec<usize> = (0..m).filter(|&i| !problem.is_valid(solution, i)).collect();
        let separation = self.separate(problem, &members, dt, tau, kappa, fractional)?;
        Ok(CoverPlan { solution, separation })
    }

    fn separate(
        &self,
        problem: &ProblemSpec,
        members: &[usize],
        dt: &[f64],
        tau: f64,
        kappa: Kappa,
        fractional: bool,
    ) -> Result<Separation> {
        let dists = &problem.dists;
        let witnesses: Vec<(usize, f64, Vec<f64>)> = members
            .iter()
            .map(|&i| {
                let (g, w) = best_single_discrimination(kappa, dists[i].weights(), dt);
                (i, g, w)
            })
            .collect();
        let (cover, mut stuck): (Vec<_>, Vec<_>) = witnesses.into_iter().partition(|(_, g, _)| *g >= tau + ACHIEVE_SLACK);
        // hits[j][r]: candidate witness j separates coverable member r.
        let hits: Vec<Vec<bool>> = cover
            .iter()
            .map(|(_, _, w)| cover.iter().map(|(i, _, _)| separates(kappa, dists[*i].weights(), dt, w, tau)).collect())
            .collect();
        let mut out = Separation::default();
        if fractional {
            if !cover.is_empty() {
                let n = cover.len();
                let mut lp = LinearProgram::maximize(vec![-1.0; n]);
                for r in 0..n {
                    lp.constrain((0..n).map(|j| f64::from(u8::from(hits[j][r]))).collect(), Relation::Ge, 1.0);
                }
                let sol = lp_solve(&lp)?;
                let mut weights = Vec::new();
                for (j, q) in sol.x.iter().enumerate() {
                    if *q > 1e-12 {
                        out.queries.push(witness_query(problem, kappa, cover[j].2.clone())?);
                        weights.push(*q);
                    }
                }
                out.fractional = Some(weights);
            } else {
                out.fractional = Some(Vec::new());
            }
        } else {
            let mut open = vec![true; cover.len()];
            let mut remaining = cover.len();
            while remaining > 0 {
                let (best, gain) = (0..cover.len())
                    .map(|j| (j, (0..cover.len()).filter(|&r| open[r] && hits[j][r]).count()))
                    .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
                // Each member's own witness separates it, so gain is positive.
                debug_assert!(gain > 0);
                for r in 0..cover.len() {
                    if hits[best][r] && open[r] {
                        open[r] = false;
                        remaining -= 1;
                    }
                }
                out.queries.push(witness_query(problem, kappa, cover[best].2.clone())?);
            }
        }
        stuck.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (i, g, w) in stuck {
            out.uncoverable.push(i);
            if g > 0.0 {
                out.extra.push(witness_query(problem, kappa, w)?);
            }
        }
        out.uncoverable.sort_unstable();
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Run reports

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutcome {
    Solution { index: usize, name: String },
    Decision { decision: Decision },
    Failure { reason: String },
    /// An update budget proved sufficient was exhausted although every
    /// oracle answer was valid.
    TheoremViolation { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub outcome: RunOutcome,
    pub queries: usize,
    pub updates: usize,
    pub update_budget: usize,
    pub seed: Option<u64>,
    pub valid_answer_fraction: f64,
    /// Bisection probes (optimizing search only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    /// Start of the MW run over the domain.
    #[serde(skip)]
    pub start: Vec<f64>,
    #[serde(skip)]
    pub gamma: f64,
    /// The update directions `ψ_t` as domain tables.
    #[serde(skip)]
    pub psi: Vec<Vec<f64>>,
    /// Whether MW ran over the class-coefficient simplex.
    #[serde(skip)]
    pub projected: bool,
}

impl RunReport {
    pub fn solution(&self) -> Option<usize> {
        match self.outcome {
            RunOutcome::Solution { index, .. } => Some(index),
            _ => None,
        }
    }

    pub fn is_violation(&self) -> bool {
        matches!(self.outcome, RunOutcome::TheoremViolation { .. })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run reports serialize")
    }

    /// `(1/T) Σ_t (D_t[ψ_t] − D[ψ_t])` over the replayed sequence.
    pub fn replay_regret(&self, truth: &[f64]) -> Result<f64> {
        if self.projected {
            return Err(SqError::InvalidArgument("replay needs a run over the domain simplex".into()));
        }
        if self.psi.is_empty() {
            return Ok(0.0);
        }
        let seq = replay_distributions(&self.start, self.gamma, &self.psi)?;
        let total: f64 = self.psi.iter().zip(&seq).map(|(psi, dt)| dot(dt, psi) - dot(truth, psi)).sum();
        Ok(total / self.psi.len() as f64)
    }
}

// ---------------------------------------------------------------------------
// Universal search

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchMode {
    Det,
    /// Sample `⌈d ln(T/δ)⌉` queries from the fractional cover per round.
    Rand { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub kappa: Kappa,
    pub mode: SearchMode,
    /// Run MW over mixtures of the class instead of the whole domain simplex.
    pub project: bool,
}

impl SolverConfig {
    pub fn det(tau: f64) -> Self {
        SolverConfig { tau, kappa: Kappa::K1, mode: SearchMode::Det, project: false }
    }

    /// MW step: `τ/3`, or `τ²/9` on the square-root scale.
    pub fn gamma(&self) -> f64 {
        match self.kappa {
            Kappa::K1 => self.tau / 3.0,
            Kappa::Kv => self.tau * self.tau / 9.0,
        }
    }

    /// `⌈4·KL/γ²⌉`: `⌈36·KL/τ²⌉` or `⌈324·KL/τ⁴⌉`.
    pub fn update_budget(&self, kl: f64) -> usize {
        let g = self.gamma();
        (4.0 * kl / (g * g)).ceil() as usize
    }

    /// The oracle the deviation test needs: STAT(τ/3) or vSTAT(τ/3).
    pub fn required_oracle(&self) -> OracleKind {
        match self.kappa {
            Kappa::K1 => OracleKind::Stat,
            Kappa::Kv => OracleKind::Vroot,
        }
    }

    fn deviates(&self, dt_phi: f64, v: f64) -> bool {
        match self.kappa {
            Kappa::K1 => (dt_phi - v).abs() > 2.0 * self.tau / 3.0,
            Kappa::Kv => (dt_phi.max(0.0).sqrt() - v.max(0.0).sqrt()).abs() > 2.0 * self.tau / 3.0,
        }
    }
}

/// MW over either the domain simplex or the class-coefficient simplex.
pub(crate) struct Tracker {
    mw: MwState,
    dists: Option<Vec<Vec<f64>>>,
    current: Vec<f64>,
}

impl Tracker {
    pub(crate) fn new(problem: &ProblemSpec, gamma: f64, project: bool) -> Result<(Self, f64)> {
        if project {
            let m = problem.dists.len();
            let dists: Vec<Vec<f64>> = problem.dists.iter().map(|d| d.weights().to_vec()).collect();
            let mw = MwState::uniform(m, gamma)?;
            let mut t = Tracker { mw, dists: Some(dists), current: Vec::new() };
            t.refresh();
            Ok((t, (m as f64).ln()))
        } else {
            let (kl, center) = kl_radius_upper(&problem.dists)?;
            let mw = MwState::new(center.weights().to_vec(), gamma)?;
            let current = mw.weights().to_vec();
            Ok((Tracker { mw, dists: None, current }, kl))
        }
    }

    fn refresh(&mut self) {
        if let Some(dists) = &self.dists {
            let mut cur = vec![0.0; dists[0].len()];
            for (l, d) in self.mw.weights().iter().zip(dists) {
                for (c, p) in cur.iter_mut().zip(d) {
                    *c += l * p;
                }
            }
            self.current = cur;
        } else {
            self.current = self.mw.weights().to_vec();
        }
    }

    pub(crate) fn current(&self) -> &[f64] {
        &self.current
    }

    pub(crate) fn start(&self) -> Vec<f64> {
        if self.dists.is_some() {
            Vec::new()
        } else {
            self.mw.initial().to_vec()
        }
    }

    pub(crate) fn update(&mut self, psi: &[f64]) -> Result<()> {
        match &self.dists {
            Some(dists) => {
                let z: Vec<f64> = dists.iter().map(|d| dot(d, psi).clamp(-1.0, 1.0)).collect();
                self.mw.update(&z)?;
            }
            None => self.mw.update(psi)?,
        }
        self.refresh();
        Ok(())
    }
}

struct RunState {
    tracker: Tracker,
    updates: usize,
    budget: usize,
    psi: Vec<Vec<f64>>,
    gamma: f64,
    project: bool,
}

impl RunState {
    fn new(problem: &ProblemSpec, cfg: &SolverConfig) -> Result<Self> {
        let gamma = cfg.gamma();
        let (tracker, kl) = Tracker::new(problem, gamma, cfg.project)?;
        Ok(RunState { tracker, updates: 0, budget: cfg.update_budget(kl), psi: Vec::new(), gamma, project: cfg.project })
    }

    /// Applies `ψ`, or reports why the budget forbids it.
    fn step(&mut self, psi: Vec<f64>, session: &OracleSession) -> Result<Option<RunOutcome>> {
        if self.updates >= self.budget {
            let reason = format!("update budget {} exhausted", self.budget);
            return Ok(Some(if session.transcript().all_valid() {
                RunOutcome::TheoremViolation { reason }
            } else {
                RunOutcome::Failure { reason }
            }));
        }
        self.tracker.update(&psi)?;
        self.psi.push(psi);
        self.updates += 1;
        Ok(None)
    }

    fn report(self, outcome: RunOutcome, session: &OracleSession, queries: usize) -> RunReport {
        RunReport {
            outcome,
            queries,
            updates: self.updates,
            update_budget: self.budget,
            seed: None,
            valid_answer_fraction: session.transcript().valid_fraction(),
            probes: None,
            start: self.tracker.start(),
            gamma: self.gamma,
            psi: self.psi,
            projected: self.project,
        }
    }
}

fn check_session_domain(problem: &ProblemSpec, session: &OracleSession) -> Result<()> {
    if !same_domain(problem.domain(), session.target().domain()) {
        return Err(SqError::DomainMismatch("oracle target and problem live on different domains".into()));
    }
    Ok(())
}

/// Asks `queries` in order; returns `ψ` for the first whose answer deviates
/// from `D_t` by more than `2τ/3`.
fn first_deviation<'a>(
    queries: impl Iterator<Item = &'a QueryFn>,
    dt: &[f64],
    cfg: &SolverConfig,
    session: &mut OracleSession,
    asked: &mut usize,
) -> Result<Option<Vec<f64>>> {
    for phi in queries {
        let v = session.ask(phi)?;
        *asked += 1;
        let p = dot(dt, phi.values());
        if cfg.deviates(p, v) {
            let sign = if p > v { 1.0 } else { -1.0 };
            return Ok(Some(phi.values().iter().map(|x| sign * x).collect()));
        }
    }
    Ok(None)
}

/// The universal search algorithm: MW from the class mixture, refuting each
/// candidate solution with its cover queries until none deviates.
pub fn solve_search_universal<O: CoverOracle + ?Sized>(
    problem: &ProblemSpec,
    oracle: &O,
    cfg: &SolverConfig,
    session: &mut OracleSession,
    mut rng: Option<&mut SqRng>,
) -> Result<RunReport> {
    problem.validate()?;
    check_session_domain(problem, session)?;
    session.require_tolerance(cfg.required_oracle(), cfg.tau / 3.0)?;
    let mut run = RunState::new(problem, cfg)?;
    let mut asked = 0;
    loop {
        let dt = run.tracker.current().to_vec();
        let fractional = matches!(cfg.mode, SearchMode::Rand { .. });
        let plan = oracle.plan(problem, &dt, cfg.tau, cfg.kappa, fractional)?;
        let found = match cfg.mode {
            SearchMode::Det => first_deviation(plan.all_queries(), &dt, cfg, session, &mut asked)?,
            SearchMode::Rand { delta } => {
                let rng = rng.as_deref_mut().ok_or_else(|| SqError::InvalidArgument("randomized search needs a generator".into()))?;
                let sampled = sample_cover(&plan.separation, run.budget, delta, rng)?;
                first_deviation(sampled.into_iter().chain(&plan.separation.extra), &dt, cfg, session, &mut asked)?
            }
        };
        match found {
            None => {
                let outcome = RunOutcome::Solution { index: plan.solution, name: problem.solutions[plan.solution].clone() };
                return Ok(run.report(outcome, session, asked));
            }
            Some(psi) => {
                if let Some(outcome) = run.step(psi, session)? {
                    return Ok(run.report(outcome, session, asked));
                }
            }
        }
    }
}

/// `⌈d ln(T/δ)⌉` draws from the fractional cover, `d` its total weight.
fn sample_cover<'a, R: Rng + ?Sized>(sep: &'a Separation, budget: usize, delta: f64, rng: &mut R) -> Result<Vec<&'a QueryFn>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SqError::InvalidArgument(format!("δ must lie in (0, 1), got {delta}")));
    }
    let weights = sep.fractional.as_deref().unwrap_or(&[]);
    if sep.queries.is_empty() {
        return Ok(Vec::new());
    }
    let d: f64 = weights.iter().sum();
    let s = (d * (budget.max(1) as f64 / delta).ln()).ceil().max(1.0) as usize;
    let w = WeightedIndex::new(weights).map_err(|e| SqError::InvalidDistribution(format!("cover weights: {e}")))?;
    Ok((0..s).map(|_| &sep.queries[w.sample(rng)]).collect())
}

// ---------------------------------------------------------------------------
// Verifiable and optimizing search

fn verify_queries(problem: &ProblemSpec) -> Result<&[QueryFn]> {
    match &problem.verify {
        Some(v) if v.len() == problem.solutions.len() => Ok(v),
        _ => Err(SqError::InvalidProblem("verifiable search needs one verification query per solution".into())),
    }
}

/// Verifiable search at threshold `θ`: propose the solution whose query is
/// smallest under `D_t` and check it; when every solution looks bad under
/// `D_t`, refute `D_t` itself with queries separating it from the class.
pub fn solve_verifiable<O: CoverOracle + ?Sized>(
    problem: &ProblemSpec,
    oracle: &O,
    theta: f64,
    tau: f64,
    session: &mut OracleSession,
) -> Result<RunReport> {
    session.require_tolerance(OracleKind::Stat, tau / 3.0)?;
    verifiable_run(problem, oracle, theta, tau, session)
}

fn verifiable_run<O: CoverOracle + ?Sized>(
    problem: &ProblemSpec,
    oracle: &O,
    theta: f64,
    tau: f64,
    session: &mut OracleSession,
) -> Result<RunReport> {
    check_session_domain(problem, session)?;
    let verify = verify_queries(problem)?;
    let cfg = SolverConfig::det(tau);
    let mut run = RunState::new(problem, &cfg)?;
    let all: Vec<usize> = (0..problem.dists.len()).collect();
    let mut asked = 0;
    loop {
        let dt = run.tracker.current().to_vec();
        let (f, value) = verify
            .iter()
            .enumerate()
            .map(|(f, q)| (f, dot(&dt, q.values())))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("at least one solution");
        let psi = if value <= theta {
            let v = session.ask(&verify[f])?;
            asked += 1;
            if v <= theta + 2.0 * tau / 3.0 {
                let outcome = RunOutcome::Solution { index: f, name: problem.solutions[f].clone() };
                return Ok(run.report(outcome, session, asked));
            }
            verify[f].values().iter().map(|x| -x).collect()
        } else {
            let sep = oracle.separate(problem, &all, &dt, tau, Kappa::K1, false)?;
            match first_deviation(sep.queries.iter().chain(&sep.extra), &dt, &cfg, session, &mut asked)? {
                Some(psi) => psi,
                None => {
                    let reason = "no solution looks acceptable and no query separates the current estimate".to_string();
                    return Ok(run.report(RunOutcome::Failure { reason }, session, asked));
                }
            }
        };
        if let Some(outcome) = run.step(psi, session)? {
            return Ok(run.report(outcome, session, asked));
        }
    }
}

/// Number of bisection probes, `⌈log₂(4/τ)⌉`.
pub fn bisection_probes(tau: f64) -> usize {
    (4.0 / tau).log2().ceil().max(1.0) as usize
}

/// Optimizing search: bisect the threshold in `[0, 1]`, running verifiable
/// search at tolerance `3τ/4` for each probe; a failed probe means the
/// threshold is below the optimum. Needs a STAT(τ/4) session.
pub fn solve_optimizing<O: CoverOracle + ?Sized>(
    problem: &ProblemSpec,
    oracle: &O,
    tau: f64,
    session: &mut OracleSession,
) -> Result<RunReport> {
    session.require_tolerance(OracleKind::Stat, tau / 4.0)?;
    let inner = 0.75 * tau;
    let probes = bisection_probes(tau);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best: Option<RunReport> = None;
    let (mut queries, mut updates, mut used) = (0, 0, 0);
    for _ in 0..probes {
        let theta = 0.5 * (lo + hi);
        let r = verifiable_run(problem, oracle, theta, inner, session)?;
        used += 1;
        queries += r.queries;
        updates += r.updates;
        match r.outcome {
            RunOutcome::Solution { .. } => {
                hi = theta;
                best = Some(r);
            }
            RunOutcome::Failure { .. } => lo = theta,
            RunOutcome::TheoremViolation { .. } => {
                return Ok(RunReport { queries, updates, probes: Some(used), ..r });
            }
            RunOutcome::Decision { .. } => unreachable!("verifiable runs never decide"),
        }
    }
    let last = match best {
        Some(r) => r,
        None => {
            let r = verifiable_run(problem, oracle, 1.0, inner, session)?;
            used += 1;
            queries += r.queries;
            updates += r.updates;
            r
        }
    };
    Ok(RunReport {
        queries,
        updates,
        probes: Some(used),
        valid_answer_fraction: session.transcript().valid_fraction(),
        ..last
    })
}

// ---------------------------------------------------------------------------
// Line_p learner

/// Output of the Line_p learner.
#[derive(Debug, Clone, Serialize)]
pub struct LineHypothesis {
    /// `±1` label per base point.
    pub labels: Vec<i8>,
    /// The line selected in the final stage, if that stage ran.
    pub line: Option<(u64, u64)>,
    pub heavy_points: usize,
    pub candidates: usize,
    pub queries: usize,
}

/// `Pr[h(z) ≠ b]` under a labeled distribution.
pub fn hypothesis_error(h: &[i8], labeled: &FiniteDistribution) -> f64 {
    h.iter()
        .enumerate()
        .map(|(z, &hz)| labeled.weights()[FiniteDomain::labeled_index(z, -hz)])
        .sum()
}

fn error_query(session: &OracleSession, h: &[i8]) -> Result<QueryFn> {
    crate::problems::disagreement_query(session.target().domain(), h)
}

/// Learns a line over `GF(p)²` under the known marginal `marginal` from an
/// oracle at tolerance `ε²/13`: label queries on heavy points, an error
/// check of the heavy-set hypothesis, then a search among the few lines with
/// large positive mass off the heavy set.
pub fn line_p_learn(p: u64, marginal: &[f64], eps: f64, session: &mut OracleSession) -> Result<LineHypothesis> {
    let n = (p * p) as usize;
    if marginal.len() != n {
        return Err(SqError::DomainMismatch(format!("marginal has {} points, expected {n}", marginal.len())));
    }
    if session.target().domain().base_points() != Some(n) {
        return Err(SqError::DomainMismatch("oracle target is not a labeled distribution over GF(p)²".into()));
    }
    if eps >= 1.0 {
        return Ok(LineHypothesis { labels: vec![-1; n], line: None, heavy_points: 0, candidates: 0, queries: 0 });
    }
    if !(eps > 0.0) {
        return Err(SqError::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    session.require_tolerance(OracleKind::Stat, eps * eps / 13.0)?;
    let domain = session.target().domain().clone();
    let heavy: Vec<usize> = (0..n).filter(|&z| marginal[z] >= eps * eps / 12.0).collect();
    let mut labels = vec![-1i8; n];
    let mut queries = 0;
    for &z in &heavy {
        let mut values = vec![0.0; domain.len()];
        values[FiniteDomain::labeled_index(z, 1)] = 1.0;
        values[FiniteDomain::labeled_index(z, -1)] = -1.0;
        let v = session.ask(&QueryFn::new(domain.clone(), values, RangeTag::Signed)?)?;
        queries += 1;
        labels[z] = if v > 0.0 { 1 } else { -1 };
    }
    let err = session.ask(&error_query(session, &labels)?)?;
    queries += 1;
    let base = LineHypothesis { labels, line: None, heavy_points: heavy.len(), candidates: 0, queries };
    if err < 5.0 * eps / 6.0 {
        return Ok(base);
    }
    let mut is_heavy = vec![false; n];
    for &z in &heavy {
        is_heavy[z] = true;
    }
    let candidates: Vec<LinePInstance> = (0..n as u64)
        .map(|i| LinePInstance::new(p, (i / p, i % p), Marginal::Uniform))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|l| {
            let lab = l.labels();
            let outside: f64 = (0..n).filter(|&z| !is_heavy[z] && lab[z] > 0).map(|z| marginal[z]).sum();
            outside >= 2.0 * eps / 3.0
        })
        .collect();
    let mut best: Option<(f64, &LinePInstance)> = None;
    let mut queries = base.queries;
    for l in &candidates {
        let v = session.ask(&error_query(session, &l.labels())?)?;
        queries += 1;
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, l));
        }
    }
    Ok(match best {
        Some((_, l)) => LineHypothesis { labels: l.labels(), line: Some(l.a), candidates: candidates.len(), queries, ..base },
        None => LineHypothesis { candidates: 0, queries, ..base },
    })
}

/// The query-count guarantee `12/ε² + 2/ε + 2`.
pub fn line_query_bound(eps: f64) -> f64 {
    12.0 / (eps * eps) + 2.0 / eps + 2.0
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{expectation, FiniteDomain};
    use crate::oracles::{AnswerStrategy, OracleSpec};
    use crate::problems::{biclique_search, biclique_verifiable, line_base_domain, line_domain, line_family};

    fn stat_session(tau: f64, target: &FiniteDistribution) -> OracleSession {
        OracleSession::exact(OracleSpec::stat(tau).unwrap(), target.clone())
    }

    #[test]
    fn single_mw_step() {
        let mut s = MwState::uniform(2, 0.5).unwrap();
        s.update(&[1.0, -1.0]).unwrap();
        assert_eq!(s.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn identical_losses_have_zero_regret() {
        let s = mw_run(vec![0.25; 4], 0.2, |t, _| vec![if t % 3 == 0 { 0.5 } else { -0.25 }; 4], 50).unwrap();
        assert_eq!(s.max_pure_regret(), 0.0);
        assert_eq!(s.weights(), &[0.25; 4]);
    }

    #[test]
    fn alternating_losses_stay_under_gamma() {
        let s = mw_run(vec![0.5, 0.5], 0.1, |t, _| if t % 2 == 0 { vec![1.0, -1.0] } else { vec![-1.0, 1.0] }, 300).unwrap();
        assert!(s.max_pure_regret() <= 0.1);
    }

    #[test]
    fn loss_out_of_range_is_rejected() {
        let mut s = MwState::uniform(2, 0.5).unwrap();
        assert!(matches!(s.update(&[1.5, 0.0]), Err(SqError::RangeViolation { index: 0, .. })));
        assert!(MwState::uniform(2, 1.0).is_err());
    }

    #[test]
    fn universally_valid_solution_needs_no_updates() {
        let mut p = biclique_search(4, 2).unwrap();
        p.solutions.push("anything".into());
        p.validity.push(vec![true; p.dists.len()]);
        let target = p.dists[3].clone();
        let mut s = stat_session(0.1 / 3.0, &target);
        let r = solve_search_universal(&p, &GreedyCoverOracle, &SolverConfig::det(0.1), &mut s, None).unwrap();
        assert_eq!(r.solution(), Some(p.solutions.len() - 1));
        assert_eq!((r.updates, r.queries), (0, 0));
    }

    #[test]
    fn biclique_search_recovers_every_plant() {
        let p = biclique_search(8, 2).unwrap();
        let cfg = SolverConfig::det(0.2);
        let limit = (36.0 * (p.dists.len() as f64).ln() / 0.04).ceil() as usize;
        for (i, d) in p.dists.iter().enumerate() {
            let mut s = stat_session(0.2 / 3.0, d);
            let r = solve_search_universal(&p, &GreedyCoverOracle, &cfg, &mut s, None).unwrap();
            assert_eq!(r.solution(), Some(i), "plant {}", p.solutions[i]);
            assert!(r.updates <= limit && r.updates <= r.update_budget);
        }
    }

    #[test]
    fn reference_answers_are_refuted_for_every_unsolved_distribution() {
        let p = line_family(5, Marginal::Uniform, 0.1).unwrap();
        let tau = 0.1;
        let d0 = p.reference.clone().unwrap();
        let spec = OracleSpec::stat(tau / 3.0).unwrap();
        let mut s = OracleSession::new(spec, AnswerStrategy::Reference(d0.clone()), p.dists[0].clone(), None).unwrap();
        let r = solve_search_universal(&p, &GreedyCoverOracle, &SolverConfig::det(tau), &mut s, None).unwrap();
        let f = r.solution().expect("a solution is emitted");
        for (i, d) in p.dists.iter().enumerate().filter(|(i, _)| !p.is_valid(f, *i)) {
            let refuted = s
                .transcript()
                .entries()
                .iter()
                .any(|e| (expectation(d, &e.query).unwrap() - e.value).abs() > tau / 3.0);
            assert!(refuted, "distribution {i} is consistent with every answer");
        }
    }

    #[test]
    fn projected_and_randomized_runs_recover_lines() {
        let p = line_family(5, Marginal::Uniform, 0.1).unwrap();
        let mut rng = crate::oracles::seeded_rng(3);
        for (i, d) in p.dists.iter().enumerate().step_by(4) {
            let mut cfg = SolverConfig::det(0.2);
            cfg.project = true;
            let mut s = stat_session(0.2 / 3.0, d);
            assert_eq!(solve_search_universal(&p, &GreedyCoverOracle, &cfg, &mut s, None).unwrap().solution(), Some(i));
            cfg.project = false;
            cfg.mode = SearchMode::Rand { delta: 0.1 };
            let mut s = stat_session(0.2 / 3.0, d);
            let r = solve_search_universal(&p, &GreedyCoverOracle, &cfg, &mut s, Some(&mut rng)).unwrap();
            assert_eq!(r.solution(), Some(i));
        }
    }

    #[test]
    fn root_scale_search_recovers_lines() {
        let p = line_family(3, Marginal::Uniform, 0.1).unwrap();
        let cfg = SolverConfig { tau: 0.2, kappa: Kappa::Kv, mode: SearchMode::Det, project: false };
        for (i, d) in p.dists.iter().enumerate() {
            let mut s = OracleSession::exact(OracleSpec::vroot(0.2 / 3.0).unwrap(), d.clone());
            let r = solve_search_universal(&p, &GreedyCoverOracle, &cfg, &mut s, None).unwrap();
            assert_eq!(r.solution(), Some(i));
        }
    }

    #[test]
    fn replay_regenerates_the_run() {
        let p = biclique_search(6, 2).unwrap();
        let d = &p.dists[5];
        let mut s = stat_session(0.2 / 3.0, d);
        let r = solve_search_universal(&p, &GreedyCoverOracle, &SolverConfig::det(0.2), &mut s, None).unwrap();
        assert!(r.updates > 0);
        let regret = r.replay_regret(d.weights()).unwrap();
        // Every update moved by more than τ/3 against the truth.
        assert!(regret > 0.2 / 3.0);
        let kl = crate::distributions::kl_divergence(d, &FiniteDistribution::uniform_mixture(&p.dists).unwrap()).unwrap();
        assert!(regret <= kl / (r.gamma * r.updates as f64) + r.gamma);
    }

    #[test]
    fn loose_threshold_accepts_the_first_candidate() {
        let p = biclique_verifiable(6, 3, Some(1.0)).unwrap();
        let mut s = stat_session(0.1 / 3.0, &p.dists[7]);
        let r = solve_verifiable(&p, &GreedyCoverOracle, 1.0, 0.1, &mut s).unwrap();
        assert!(r.solution().is_some());
        assert_eq!((r.updates, r.queries), (0, 1));
    }

    #[test]
    fn verifiable_biclique_meets_threshold() {
        let (n, k, tau) = (6, 3, 0.1);
        let p = biclique_verifiable(n, k, None).unwrap();
        let theta = p.threshold.unwrap();
        for (i, d) in p.dists.iter().enumerate() {
            let mut s = stat_session(tau / 3.0, d);
            let r = solve_verifiable(&p, &GreedyCoverOracle, theta, tau, &mut s).unwrap();
            let f = r.solution().expect("accepted");
            let q = &p.verify.as_ref().unwrap()[f];
            assert!(expectation(d, q).unwrap() <= theta + tau, "input {i}");
        }
    }

    #[test]
    fn optimizing_with_equal_values_takes_all_probes() {
        let mut p = biclique_verifiable(4, 2, None).unwrap();
        let dom = p.domain().clone();
        let flat = QueryFn::constant(dom, 0.3, RangeTag::Unit).unwrap();
        p.verify = Some(vec![flat; p.solutions.len()]);
        p.kind = crate::problems::ProblemKind::Optimizing;
        let tau = 0.2;
        let mut s = stat_session(tau / 4.0, &p.dists[0]);
        let r = solve_optimizing(&p, &GreedyCoverOracle, tau, &mut s).unwrap();
        assert!(r.solution().is_some());
        assert_eq!(r.probes, Some(bisection_probes(tau)));
        assert_eq!(bisection_probes(0.2), 5);
    }

    #[test]
    fn optimizing_biclique_is_tau_optimal() {
        let p = biclique_verifiable(6, 3, None).unwrap();
        let tau = 0.2;
        let verify = p.verify.clone().unwrap();
        for d in p.dists.iter().step_by(3) {
            let mut s = stat_session(tau / 4.0, d);
            let r = solve_optimizing(&p, &GreedyCoverOracle, tau, &mut s).unwrap();
            let values: Vec<f64> = verify.iter().map(|q| expectation(d, q).unwrap()).collect();
            let best = values.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(values[r.solution().unwrap()] <= best + tau);
        }
    }

    #[test]
    fn line_learner_meets_error_and_query_bounds() {
        let p = 11;
        let eps = 0.3;
        let labeled = line_domain(p).unwrap();
        let marginal = vec![1.0 / (p * p) as f64; (p * p) as usize];
        for a in [(0, 0), (3, 7), (10, 1)] {
            let target = LinePInstance::new(p, a, Marginal::Uniform).unwrap().distribution(&labeled).unwrap();
            let mut s = stat_session(eps * eps / 13.0, &target);
            let h = line_p_learn(p, &marginal, eps, &mut s).unwrap();
            assert!(hypothesis_error(&h.labels, &target) <= eps);
            assert!(h.queries as f64 <= line_query_bound(eps));
            assert_eq!(h.queries, s.transcript().query_count());
        }
    }

    #[test]
    fn line_learner_point_mass_and_degenerate_eps() {
        let p = 5;
        let labeled = line_domain(p).unwrap();
        let base = line_base_domain(p).unwrap();
        let point = crate::distributions::FiniteDistribution::point_mass(base, 7).unwrap();
        let l = LinePInstance::new(p, (1, 2), Marginal::Uniform).unwrap();
        let target = crate::distributions::pac_lift(&point, &l.labels(), &labeled).unwrap();
        let mut s = stat_session(0.25 / 13.0, &target);
        let h = line_p_learn(p, point.weights(), 0.5, &mut s).unwrap();
        assert_eq!(h.heavy_points, 1);
        assert_eq!(hypothesis_error(&h.labels, &target), 0.0);
        let h = line_p_learn(p, point.weights(), 2.0, &mut s).unwrap();
        assert!(h.labels.iter().all(|b| *b == -1) && h.queries == 0);
    }

    #[test]
    fn sampled_decision_basics() {
        let dom = FiniteDomain::indexed(2).unwrap();
        let d0 = FiniteDistribution::uniform(dom.clone());
        let d1 = FiniteDistribution::new(dom.clone(), vec![0.8, 0.2]).unwrap();
        let phi = QueryFn::new(dom, vec![1.0, -1.0], RangeTag::Signed).unwrap();
        let cover = QueryMeasure::uniform(vec![phi]).unwrap();
        let mut rng = crate::oracles::seeded_rng(1);
        let mut s = stat_session(0.1, &d0);
        let r = solve_decision_sampled(&cover, 1.0, &d0, 0.2, 0.5, &mut s, &mut rng).unwrap();
        assert_eq!((r.decision, r.queries), (Decision::Reference, 1));
        let mut s = stat_session(0.1, &d1);
        let r = solve_decision_sampled(&cover, 1.0, &d0, 0.2, 0.5, &mut s, &mut rng).unwrap();
        assert_eq!(r.decision, Decision::InClass);
    }
}

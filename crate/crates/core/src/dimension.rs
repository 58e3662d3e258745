//! Statistical dimensions: covers, randomized and deterministic dimensions
//! for decision and search problems, and the combined dimension.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{FiniteDistribution, Measure};
use crate::error::{Result, SqError};
use crate::games::{
    achievable_subsets_limited, deltas, discrimination, exact_min_cover, fractional_cover, fractional_packing,
    greedy_cover, lp_solve, margin_lp, mask_of, CoverFamily, CoverSet, Kappa, LinearProgram, Relation, ACHIEVE_SLACK,
    SUBSET_LIMIT,
};
use crate::norms::{kappa1_frac, kbar1};
use crate::problems::{ProblemKind, ProblemSpec};
use crate::report::{deserialize_extended, serialize_extended, Exactness};

/// Largest class handled by the deterministic-dimension subset scan.
pub const SD_LIMIT: usize = 16;

/// Largest domain for the combined-dimension game over sign vertices.
pub const CRSD_DOMAIN_LIMIT: usize = 16;

/// Primal and dual covering values must agree to this relative tolerance.
pub const DUALITY_TOL: f64 = 1e-6;

const RAND_TO_DET_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    DetCover,
    Rsd,
    Sd,
    RsdSearch,
    RsdVerifiable,
    RsdOptimizing,
    Crsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CoverMode {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DimensionCertificate {
    /// Covering subsets with their witness query tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<Vec<CoverSet>>,
    /// Probability of each cover set (randomized covers).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover_weights: Option<Vec<f64>>,
    /// Hard measure over the class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<Vec<f64>>,
    /// Reference distribution attaining the value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    /// Solution measure attaining the inner minimum (search).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution_measure: Option<Vec<f64>>,
    /// Distributions no query separates from the reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncoverable: Option<Vec<usize>>,
    /// Queries of the maximizing mixed strategy and their weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<Vec<(Vec<f64>, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub kind: DimensionKind,
    #[serde(default)]
    pub instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Kappa>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(serialize_with = "serialize_extended", deserialize_with = "deserialize_extended")]
    pub value: f64,
    pub exactness: Exactness,
    pub certificate: DimensionCertificate,
}

impl DimensionReport {
    fn new(kind: DimensionKind, kappa: Option<Kappa>, tau: Option<f64>, value: f64, exactness: Exactness) -> Self {
        DimensionReport { kind, instance: String::new(), kappa, tau, value, exactness, certificate: Default::default() }
    }

    pub fn named(mut self, instance: &str) -> Self {
        self.instance = instance.into();
        self
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

fn family_for(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64, kappa: Kappa) -> Result<CoverFamily> {
    achievable_subsets_limited(dists, d0, tau, kappa, SUBSET_LIMIT)
}

/// Family built by growing each singleton greedily; it may miss coverable
/// subsets, so covers computed from it overestimate the true dimension.
pub fn grown_family(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64) -> Result<CoverFamily> {
    if dists.len() > 64 {
        return Err(SqError::GuardExceeded { guard: "grown family distributions", actual: dists.len(), limit: 64 });
    }
    let rows = deltas(dists, d0)?;
    let threshold = tau + ACHIEVE_SLACK;
    let n = rows.len();
    let grown: Vec<Option<(u64, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut members = vec![i];
            let mut signs = vec![1i8];
            let first = margin_lp(&[rows[i].as_slice()], &[1])?;
            if first.value < threshold {
                return Ok(None);
            }
            let mut witness = first.witness;
            for j in (0..n).filter(|&j| j != i) {
                for s in [1i8, -1] {
                    let mut r: Vec<&[f64]> = members.iter().map(|&m| rows[m].as_slice()).collect();
                    r.push(&rows[j]);
                    let mut sg = signs.clone();
                    sg.push(s);
                    let m = margin_lp(&r, &sg)?;
                    if m.value >= threshold {
                        members.push(j);
                        signs.push(s);
                        witness = m.witness;
                        break;
                    }
                }
            }
            Ok(Some((mask_of(&members), witness)))
        })
        .collect::<Result<_>>()?;
    let mut sets: Vec<(u64, Vec<f64>)> = Vec::new();
    for (m, w) in grown.into_iter().flatten() {
        if !sets.iter().any(|(o, _)| o & m == m) {
            sets.retain(|(o, _)| o & m != *o);
            sets.push((m, w));
        }
    }
    sets.sort_by_key(|(m, _)| (std::cmp::Reverse(m.count_ones()), *m));
    Ok(CoverFamily {
        ground: n,
        tau,
        kappa: Kappa::K1,
        sets: sets.into_iter().map(|(m, w)| CoverSet { members: crate::games::members_of(m), witness: w }).collect(),
        exact: false,
    })
}

/// Smallest deterministic cover: a set of queries such that every
/// distribution is separated from `d0` by more than `tau` by one of them.
pub fn det_cover(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64, mode: CoverMode) -> Result<DimensionReport> {
    let family = family_for(dists, d0, tau, Kappa::K1)?;
    let uncovered = family.uncovered();
    if !uncovered.is_empty() {
        return Err(SqError::UncoverableSet { indices: uncovered, tau });
    }
    let chosen = match mode {
        CoverMode::Exact => exact_min_cover(&family)?,
        CoverMode::Greedy => greedy_cover(&family)?,
    };
    let exactness = if mode == CoverMode::Exact { Exactness::Exact } else { Exactness::UpperBound };
    let mut r = DimensionReport::new(DimensionKind::DetCover, Some(Kappa::K1), Some(tau), chosen.len() as f64, exactness);
    r.certificate.cover = Some(chosen.iter().map(|&k| family.sets[k].clone()).collect());
    Ok(r)
}

/// Randomized statistical dimension of distinguishing `dists` from `d0`,
/// as the value of the fractional covering LP. For `K1` the dual packing LP
/// is solved separately and must agree.
pub fn rsd_decision(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64, kappa: Kappa) -> Result<DimensionReport> {
    let family = family_for(dists, d0, tau, kappa)?;
    rsd_from_family(&family, tau, kappa)
}

/// As [`rsd_decision`], falling back to a greedily grown family (an upper
/// bound) when the class exceeds the exact enumeration guard.
pub fn rsd_decision_auto(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64, kappa: Kappa) -> Result<DimensionReport> {
    if dists.len() <= SUBSET_LIMIT || kappa == Kappa::Kv {
        return rsd_decision(dists, d0, tau, kappa);
    }
    let family = grown_family(dists, d0, tau)?;
    let mut r = rsd_from_family(&family, tau, kappa)?;
    r.certificate.note = Some(format!("class of {} exceeds exact enumeration; greedily grown cover family", dists.len()));
    Ok(r)
}

fn rsd_from_family(family: &CoverFamily, tau: f64, kappa: Kappa) -> Result<DimensionReport> {
    let exactness = if family.exact { Exactness::Exact } else { Exactness::UpperBound };
    if family.ground == 0 {
        return Ok(DimensionReport::new(DimensionKind::Rsd, Some(kappa), Some(tau), 0.0, Exactness::Exact));
    }
    let primal = fractional_cover(family)?;
    let mut r = DimensionReport::new(DimensionKind::Rsd, Some(kappa), Some(tau), primal.value, exactness);
    if let Some(i) = primal.uncovered {
        r.exactness = Exactness::Exact;
        r.certificate.uncoverable = Some(family.uncovered());
        let mut mu = vec![0.0; family.ground];
        mu[i] = 1.0;
        r.certificate.measure = Some(mu);
        return Ok(r);
    }
    let (dual, mu) = fractional_packing(family)?;
    if (dual - primal.value).abs() > DUALITY_TOL * primal.value.max(1.0) {
        return Err(SqError::VerificationFailed(format!("covering value {} differs from packing value {dual}", primal.value)));
    }
    let keep: Vec<usize> = (0..family.sets.len()).filter(|&k| primal.weights[k] > 0.0).collect();
    r.certificate.cover = Some(keep.iter().map(|&k| family.sets[k].clone()).collect());
    r.certificate.cover_weights = Some(keep.iter().map(|&k| primal.weights[k]).collect());
    r.certificate.measure = Some(mu);
    Ok(r)
}

/// The packing (dual) value alone, for cross-checks.
pub fn rsd_dual(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64) -> Result<(f64, Vec<f64>)> {
    fractional_packing(&family_for(dists, d0, tau, Kappa::K1)?)
}

/// Re-checks a randomized-cover certificate: witnesses separate their
/// members, and each distribution is covered with probability `≥ 1/value`.
pub fn verify_cover_certificate(report: &DimensionReport, dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Result<()> {
    let (Some(cover), Some(tau)) = (&report.certificate.cover, report.tau) else {
        return Err(SqError::VerificationFailed("report carries no cover".into()));
    };
    let kappa = report.kappa.unwrap_or(Kappa::K1);
    let uniform = vec![1.0 / cover.len().max(1) as f64; cover.len()];
    let weights = report.certificate.cover_weights.as_ref().unwrap_or(&uniform);
    let mut mass = vec![0.0; dists.len()];
    for (set, w) in cover.iter().zip(weights) {
        for &i in &set.members {
            let gap = discrimination(kappa, dists[i].weights(), d0.weights(), &set.witness);
            if gap < tau + ACHIEVE_SLACK * 0.5 {
                return Err(SqError::VerificationFailed(format!("witness separates {i} only by {gap}")));
            }
            mass[i] += w;
        }
    }
    let need = if report.kind == DimensionKind::DetCover { 1e-12 } else { 1.0 / report.value - 1e-9 };
    if let Some(i) = mass.iter().position(|m| *m < need) {
        return Err(SqError::VerificationFailed(format!("distribution {i} covered with probability {}", mass[i])));
    }
    Ok(())
}

/// Deterministic statistical dimension: the worst subset `D'` of the
/// class, measured by the inverse of the largest fraction of `D'` one query
/// covers.
pub fn sd_decision(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64) -> Result<DimensionReport> {
    if dists.len() > SD_LIMIT {
        return Err(SqError::GuardExceeded { guard: "SD subset scan", actual: dists.len(), limit: SD_LIMIT });
    }
    let mut r = DimensionReport::new(DimensionKind::Sd, Some(Kappa::K1), Some(tau), 0.0, Exactness::Exact);
    if dists.is_empty() {
        return Ok(r);
    }
    let family = family_for(dists, d0, tau, Kappa::K1)?;
    let uncovered = family.uncovered();
    if !uncovered.is_empty() {
        r.value = f64::INFINITY;
        r.certificate.measure = Some(uniform_over(dists.len(), &uncovered[..1]));
        r.certificate.uncoverable = Some(uncovered);
        return Ok(r);
    }
    let masks = family.masks();
    let n = dists.len();
    let (best_mask, value) = (1u64..(1 << n))
        .into_par_iter()
        .map(|sub| {
            let covered = masks.iter().map(|m| (m & sub).count_ones()).max().unwrap_or(0);
            (sub, sub.count_ones() as f64 / covered as f64)
        })
        .reduce(|| (0, 0.0), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    r.value = value;
    let members = crate::games::members_of(best_mask);
    r.certificate.measure = Some(uniform_over(n, &members));
    Ok(r)
}

fn uniform_over(n: usize, members: &[usize]) -> Vec<f64> {
    let mut mu = vec![0.0; n];
    for &i in members {
        mu[i] = 1.0 / members.len() as f64;
    }
    mu
}

/// Reference candidates used when the caller supplies none: uniform over the
/// domain and the uniform mixture of the class.
pub fn default_references(dists: &[FiniteDistribution]) -> Result<Vec<FiniteDistribution>> {
    let first = dists.first().ok_or_else(|| SqError::InvalidProblem("empty class".into()))?;
    Ok(vec![FiniteDistribution::uniform(first.domain().clone()), FiniteDistribution::uniform_mixture(dists)?])
}

/// Solution measures searched by default: point masses, uniform over all
/// solutions, uniform over each distribution's valid set, and (for at most
/// ten solutions) uniform over every subset.
pub fn default_solution_measures(problem: &ProblemSpec) -> Result<Vec<Measure>> {
    let m = problem.solutions.len();
    let mut subsets: Vec<Vec<usize>> = (0..m).map(|f| vec![f]).collect();
    subsets.push((0..m).collect());
    for i in 0..problem.dists.len() {
        subsets.push(problem.valid_solutions(i));
    }
    if m <= 10 {
        for mask in 1u64..(1 << m) {
            subsets.push(crate::games::members_of(mask));
        }
    }
    subsets.sort();
    subsets.dedup();
    subsets.into_iter().filter(|s| !s.is_empty()).map(|s| Measure::uniform_over(m, &s)).collect()
}

/// `Z_𝒫(α)`: distributions whose valid set has `𝒫`-mass at least `α`.
pub fn solved_with_probability(problem: &ProblemSpec, p: &Measure, alpha: f64) -> Vec<usize> {
    (0..problem.dists.len())
        .filter(|&i| problem.valid_solutions(i).iter().map(|&f| p.weights()[f]).sum::<f64>() >= alpha - 1e-12)
        .collect()
}

/// `max_{D0 ∈ candidates} min_{𝒫 ∈ family} RSD(B(D ∖ Z_𝒫(α), D0), τ)`.
///
/// The reference maximum is over an explicit candidate list and the inner
/// minimum over a finite family of solution measures.
pub fn rsd_search(
    problem: &ProblemSpec,
    tau: f64,
    alpha: f64,
    candidates: Option<&[FiniteDistribution]>,
    solution_measures: Option<&[Measure]>,
) -> Result<DimensionReport> {
    if problem.kind == ProblemKind::Decision {
        return Err(SqError::InvalidProblem("rsd_search needs a search problem; convert with as_search".into()));
    }
    let default_refs;
    let candidates = match candidates {
        Some(c) => c,
        None => {
            default_refs = default_references(&problem.dists)?;
            &default_refs
        }
    };
    if candidates.is_empty() {
        return Err(SqError::InvalidArgument("no reference candidates".into()));
    }
    let default_measures;
    let measures = match solution_measures {
        Some(m) => m,
        None => {
            default_measures = default_solution_measures(problem)?;
            &default_measures
        }
    };
    if measures.is_empty() {
        return Err(SqError::InvalidArgument("no solution measures".into()));
    }
    // Distinct remainders D ∖ Z_𝒫(α) are evaluated once per reference.
    let mut remainders: Vec<(Vec<usize>, usize)> = Vec::new();
    for (k, p) in measures.iter().enumerate() {
        let solved = solved_with_probability(problem, p, alpha);
        let rest: Vec<usize> = (0..problem.dists.len()).filter(|i| !solved.contains(i)).collect();
        if !remainders.iter().any(|(r, _)| *r == rest) {
            remainders.push((rest, k));
        }
    }
    let mut best: Option<DimensionReport> = None;
    for d0 in candidates {
        let mut inner: Option<DimensionReport> = None;
        for (rest, k) in &remainders {
            let class: Vec<FiniteDistribution> = rest.iter().map(|&i| problem.dists[i].clone()).collect();
            let mut r = if class.is_empty() {
                DimensionReport::new(DimensionKind::Rsd, Some(Kappa::K1), Some(tau), 0.0, Exactness::Exact)
            } else {
                rsd_decision(&class, d0, tau, Kappa::K1)?
            };
            if let Some(mu) = r.certificate.measure.take() {
                let mut full = vec![0.0; problem.dists.len()];
                for (j, &i) in rest.iter().enumerate() {
                    full[i] = mu[j];
                }
                r.certificate.measure = Some(full);
            }
            r.certificate.cover = None;
            r.certificate.cover_weights = None;
            r.certificate.solution_measure = Some(measures[*k].weights().to_vec());
            if inner.as_ref().is_none_or(|b| r.value < b.value) {
                inner = Some(r);
            }
        }
        let mut inner = inner.expect("at least one solution measure");
        inner.certificate.reference = Some(d0.weights().to_vec());
        if best.as_ref().is_none_or(|b| inner.value > b.value) {
            best = Some(inner);
        }
    }
    let mut r = best.expect("at least one candidate");
    r.kind = DimensionKind::RsdSearch;
    r.exactness = Exactness::LowerBound;
    r.instance = problem.name.clone();
    Ok(r)
}

/// `max_{D0 ∈ candidates ∩ D_θ} RSD(B(D, D0), τ)` where `D_θ` holds the
/// references on which no solution passes verification.
pub fn rsd_verifiable(
    problem: &ProblemSpec,
    theta: f64,
    tau: f64,
    candidates: Option<&[FiniteDistribution]>,
) -> Result<DimensionReport> {
    let default_refs;
    let candidates = match candidates {
        Some(c) => c,
        None => {
            default_refs = verifiable_references(problem)?;
            &default_refs
        }
    };
    let admitted: Vec<&FiniteDistribution> =
        candidates.iter().filter_map(|d0| problem.admits_reference(d0, theta).map(|ok| ok.then_some(d0)).transpose()).collect::<Result<_>>()?;
    best_over_references(&problem.dists, &admitted, tau, DimensionKind::RsdVerifiable, &problem.name)
}

fn verifiable_references(problem: &ProblemSpec) -> Result<Vec<FiniteDistribution>> {
    let mut refs = default_references(&problem.dists)?;
    if let Some(r) = &problem.reference {
        refs.insert(0, r.clone());
    }
    Ok(refs)
}

fn best_over_references(
    dists: &[FiniteDistribution],
    admitted: &[&FiniteDistribution],
    tau: f64,
    kind: DimensionKind,
    name: &str,
) -> Result<DimensionReport> {
    let mut best: Option<DimensionReport> = None;
    for d0 in admitted {
        let mut r = if dists.is_empty() {
            DimensionReport::new(kind, Some(Kappa::K1), Some(tau), 0.0, Exactness::Exact)
        } else {
            rsd_decision_auto(dists, d0, tau, Kappa::K1)?
        };
        r.certificate.reference = Some(d0.weights().to_vec());
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    let mut r = best.unwrap_or_else(|| {
        let mut r = DimensionReport::new(kind, Some(Kappa::K1), Some(tau), 0.0, Exactness::LowerBound);
        r.certificate.note = Some("no candidate reference is admissible".into());
        r
    });
    r.kind = kind;
    r.instance = name.into();
    if r.exactness == Exactness::Exact {
        r.exactness = Exactness::LowerBound;
    } else if r.exactness == Exactness::UpperBound {
        // The inner value overestimates, the outer maximum underestimates.
        r.certificate.note.get_or_insert_with(|| "inner dimension is an upper bound".into());
    }
    Ok(r)
}

/// `max_{θ ∈ grid} max_{D0 ∈ candidates ∩ D_{θ+ε}} RSD(B(D ∖ D_θ, D0), τ)`.
pub fn rsd_optimizing(
    problem: &ProblemSpec,
    eps: f64,
    tau: f64,
    theta_grid: &[f64],
    candidates: Option<&[FiniteDistribution]>,
) -> Result<DimensionReport> {
    let verify = problem.verify.as_ref().ok_or_else(|| SqError::InvalidProblem("no verification queries".into()))?;
    let default_refs;
    let candidates = match candidates {
        Some(c) => c,
        None => {
            default_refs = verifiable_references(problem)?;
            &default_refs
        }
    };
    let mut best: Option<DimensionReport> = None;
    for &theta in theta_grid {
        let mut passable = Vec::new();
        for d in &problem.dists {
            let mut any = false;
            for q in verify {
                if crate::distributions::expectation(d, q)? <= theta {
                    any = true;
                    break;
                }
            }
            if any {
                passable.push(d.clone());
            }
        }
        let mut admitted = Vec::new();
        for d0 in candidates {
            if problem.admits_reference(d0, theta + eps)? {
                admitted.push(d0);
            }
        }
        let mut r = best_over_references(&passable, &admitted, tau, DimensionKind::RsdOptimizing, &problem.name)?;
        r.certificate.note = Some(format!("theta={theta}"));
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| SqError::InvalidArgument("empty threshold grid".into()))
}

/// Combined dimension `sup_μ 1/κ̄(μ, D0)`, from the zero-sum game between a
/// measure over the class and a query vertex.
///
/// `K1` plays sign vectors `σ ∈ {±1}^X` with payoff `|⟨σ, D − D0⟩|` and is
/// exact. `Kv` restricts the query player to binary vertices, which can only
/// lower the game value, so its report is an upper bound.
pub fn crsd(dists: &[FiniteDistribution], d0: &FiniteDistribution, kappa: Kappa) -> Result<DimensionReport> {
    let nx = d0.len();
    if nx > CRSD_DOMAIN_LIMIT {
        return Err(SqError::GuardExceeded { guard: "combined dimension domain", actual: nx, limit: CRSD_DOMAIN_LIMIT });
    }
    let mut r = DimensionReport::new(DimensionKind::Crsd, Some(kappa), None, 0.0, Exactness::Exact);
    if dists.is_empty() {
        return Ok(r);
    }
    if let Some(i) = dists.iter().position(|d| d.weights() == d0.weights()) {
        return Err(SqError::InvalidProblem(format!("reference equals class member {i}")));
    }
    deltas(dists, d0)?;
    let vertices: Vec<Vec<f64>> = match kappa {
        // σ and −σ give the same payoff; fix the first coordinate.
        Kappa::K1 => (0..1u64 << (nx - 1))
            .map(|b| (0..nx).map(|x| if x > 0 && (b >> (x - 1)) & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect(),
        Kappa::Kv => (1..1u64 << nx).map(|b| (0..nx).map(|x| ((b >> x) & 1) as f64).collect()).collect(),
    };
    let payoff: Vec<Vec<f64>> = vertices
        .par_iter()
        .map(|phi| dists.iter().map(|d| discrimination(kappa, d.weights(), d0.weights(), phi)).collect())
        .collect();
    // Query player maximizes v subject to Σ_σ x_σ A[σ][D] ≥ v for every D;
    // the duals of those rows are the optimal measure over the class.
    let q = vertices.len();
    let k = dists.len();
    let mut obj = vec![0.0; q + 1];
    obj[q] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    lp.bound(q, f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..k {
        let mut row: Vec<f64> = payoff.iter().map(|p| -p[j]).collect();
        row.push(1.0);
        lp.constrain(row, Relation::Le, 0.0);
    }
    let mut simplex = vec![1.0; q];
    simplex.push(0.0);
    lp.constrain(simplex, Relation::Eq, 1.0);
    let sol = lp_solve(&lp)?;
    let value = sol.objective;
    let raw: Vec<f64> = sol.duals[..k].iter().map(|y| y.abs()).collect();
    let total: f64 = raw.iter().sum();
    let mu: Vec<f64> = raw.iter().map(|y| y / total).collect();
    if kappa == Kappa::K1 {
        // Independent check: the best response to μ must not beat the value.
        let check = kbar1(dists, &Measure::normalized(mu.clone())?, d0)?;
        if (check.value - value).abs() > 1e-7 * value.max(1.0) {
            return Err(SqError::VerificationFailed(format!("game value {value} but κ̄1(μ) = {}", check.value)));
        }
    }
    r.value = if value > 0.0 { 1.0 / value } else { f64::INFINITY };
    r.exactness = if kappa == Kappa::K1 { Exactness::Exact } else { Exactness::UpperBound };
    r.certificate.measure = Some(mu);
    r.certificate.queries =
        Some(vertices.into_iter().zip(sol.x[..q].iter().copied()).filter(|(_, w)| *w > 1e-12).collect());
    Ok(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct RelationCheck {
    pub tau: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub rsd: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub bound: f64,
    /// `"le"` for `rsd ≤ bound`, `"gt"` for `rsd > bound`.
    pub relation: &'static str,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CombinedRelationAudit {
    #[serde(serialize_with = "serialize_extended")]
    pub crsd: f64,
    pub checks: Vec<RelationCheck>,
}

impl CombinedRelationAudit {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// With `d = cRSD`: the randomized dimension at `τ = 1/(3d)` is at most
/// `3d`, and at `τ ∈ {1/(2d), 1/d}` it exceeds `dτ`.
pub fn combined_relation_audit(dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Result<CombinedRelationAudit> {
    if dists.is_empty() {
        return Ok(CombinedRelationAudit { crsd: 0.0, checks: vec![] });
    }
    let d = crsd(dists, d0, Kappa::K1)?.value;
    let mut checks = Vec::new();
    let upper_tau = 1.0 / (3.0 * d);
    let r = rsd_decision(dists, d0, upper_tau, Kappa::K1)?.value;
    checks.push(RelationCheck { tau: upper_tau, rsd: r, bound: 3.0 * d, relation: "le", holds: r <= 3.0 * d + DUALITY_TOL });
    for tau in [1.0 / (2.0 * d), 1.0 / d] {
        let r = rsd_decision(dists, d0, tau, Kappa::K1)?.value;
        checks.push(RelationCheck { tau, rsd: r, bound: d * tau, relation: "gt", holds: r > d * tau });
    }
    Ok(CombinedRelationAudit { crsd: d, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterministicCover {
    /// Indices into the randomized cover's sets, without repeats.
    pub sets: Vec<usize>,
    pub samples: usize,
    pub covered_mass: f64,
    pub attempts: usize,
}

/// Samples `s = ⌈d ln(1/δ)⌉` sets from a randomized cover with weights `q`
/// and accepts once the uncovered `μ`-mass is below `δ`.
pub fn rand_to_det<R: Rng + ?Sized>(
    family: &CoverFamily,
    q: &[f64],
    d: f64,
    delta: f64,
    mu: &Measure,
    rng: &mut R,
) -> Result<DeterministicCover> {
    if q.len() != family.sets.len() || mu.len() != family.ground {
        return Err(SqError::InvalidArgument("cover weights or measure do not match the family".into()));
    }
    if !(delta > 0.0 && delta < 1.0) || !(d >= 1.0 && d.is_finite()) {
        return Err(SqError::InvalidArgument(format!("need δ ∈ (0,1) and finite d ≥ 1, got δ={delta}, d={d}")));
    }
    let samples = ((d * (1.0 / delta).ln()).ceil() as usize).max(1);
    let sampler = rand::distr::weighted::WeightedIndex::new(q.iter().copied())
        .map_err(|e| SqError::InvalidArgument(format!("bad cover weights: {e}")))?;
    let masks = family.masks();
    for attempt in 1..=RAND_TO_DET_RETRIES {
        let mut chosen: Vec<usize> = (0..samples).map(|_| rand::distr::Distribution::sample(&sampler, rng)).collect();
        chosen.sort_unstable();
        chosen.dedup();
        let covered = chosen.iter().fold(0u64, |a, &k| a | masks[k]);
        let covered_mass: f64 = (0..family.ground).filter(|&i| covered & (1 << i) != 0).map(|i| mu.weights()[i]).sum();
        if 1.0 - covered_mass < delta {
            return Ok(DeterministicCover { sets: chosen, samples, covered_mass, attempts: attempt });
        }
    }
    Err(SqError::VerificationFailed(format!("no sampled cover reached mass 1-{delta} in {RAND_TO_DET_RETRIES} attempts")))
}

/// `(β − max_f μ(Z_f)) / κ1-frac(μ, D0, τ)`: queries needed by any algorithm
/// that succeeds with probability `β` when the input is drawn from `μ`.
///
/// For a decision problem the answer consistent with the reference is
/// valid for no member of the class, so `max_f μ(Z_f)` is taken as 0.
pub fn simple_lower_bound(problem: &ProblemSpec, mu: &Measure, d0: &FiniteDistribution, tau: f64, beta: f64) -> Result<f64> {
    if mu.len() != problem.dists.len() {
        return Err(SqError::InvalidArgument("measure must weight the problem's distributions".into()));
    }
    let solved = if problem.kind == ProblemKind::Decision {
        0.0
    } else {
        (0..problem.solutions.len()).map(|f| mu.mass(problem.solved_by(f))).fold(0.0, f64::max)
    };
    let numerator = beta - solved;
    let frac = kappa1_frac(&problem.dists, mu, d0, tau)?.value;
    Ok(if frac > 0.0 {
        numerator / frac
    } else if numerator > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::FiniteDomain;
    use crate::oracles::seeded_rng;

    fn dist(w: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(FiniteDomain::indexed(w.len()).unwrap(), w.to_vec()).unwrap()
    }

    fn on(d0: &FiniteDistribution, w: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(d0.domain().clone(), w.to_vec()).unwrap()
    }

    #[test]
    fn singleton_dimensions() {
        let d0 = dist(&[0.5, 0.5]);
        let d = [on(&d0, &[0.75, 0.25])];
        assert_eq!(det_cover(&d, &d0, 0.2, CoverMode::Exact).unwrap().value, 1.0);
        assert!((rsd_decision(&d, &d0, 0.2, Kappa::K1).unwrap().value - 1.0).abs() < 1e-12);
        assert_eq!(sd_decision(&d, &d0, 0.2).unwrap().value, 1.0);
        assert!((crsd(&d, &d0, Kappa::K1).unwrap().value - 2.0).abs() < 1e-9);
        assert!(matches!(det_cover(&d, &d0, 0.6, CoverMode::Exact), Err(SqError::UncoverableSet { .. })));
    }

    #[test]
    fn orthogonal_pair_needs_one_query() {
        let d0 = dist(&[0.25; 4]);
        let d = [on(&d0, &[0.35, 0.15, 0.25, 0.25]), on(&d0, &[0.25, 0.25, 0.35, 0.15])];
        let r = det_cover(&d, &d0, 0.15, CoverMode::Exact).unwrap();
        assert_eq!(r.value, 1.0);
        verify_cover_certificate(&r, &d, &d0).unwrap();
    }

    #[test]
    fn spike_family_needs_k() {
        for (k, tau) in [(3, 0.6), (4, 0.6), (5, 0.7)] {
            let p = crate::problems::spike_family(k).unwrap();
            let d0 = p.reference.as_ref().unwrap();
            let r = rsd_decision(&p.dists, d0, tau, Kappa::K1).unwrap();
            assert!((r.value - k as f64).abs() < 1e-9, "k={k}: {}", r.value);
            verify_cover_certificate(&r, &p.dists, d0).unwrap();
            assert!(sd_decision(&p.dists, d0, tau).unwrap().value <= r.value + 1e-9);
        }
    }

    #[test]
    fn combined_relation_on_singleton() {
        let d0 = dist(&[0.5, 0.5]);
        let d = [on(&d0, &[0.75, 0.25])];
        let a = combined_relation_audit(&d, &d0).unwrap();
        assert!((a.crsd - 2.0).abs() < 1e-9);
        assert!(a.passed());
        assert!(a.checks[0].rsd <= 6.0);
        assert!(combined_relation_audit(&[], &d0).unwrap().passed());
    }

    #[test]
    fn rand_to_det_sample_count() {
        let fam = CoverFamily {
            ground: 4,
            tau: 0.1,
            kappa: Kappa::K1,
            sets: vec![
                CoverSet { members: vec![0, 1], witness: vec![] },
                CoverSet { members: vec![2, 3], witness: vec![] },
            ],
            exact: true,
        };
        let mu = Measure::uniform(4).unwrap();
        let mut rng = seeded_rng(3);
        let c = rand_to_det(&fam, &[0.5, 0.5], 2.0, 0.1, &mu, &mut rng).unwrap();
        assert_eq!(c.samples, 5);
        assert_eq!(c.sets, vec![0, 1]);
        let single = CoverFamily { sets: vec![CoverSet { members: vec![0, 1, 2, 3], witness: vec![] }], ..fam };
        let c = rand_to_det(&single, &[1.0], 1.0, 0.25, &mu, &mut rng).unwrap();
        assert_eq!(c.sets, vec![0]);
    }

    #[test]
    fn search_with_universal_solution_is_free() {
        let d0 = dist(&[0.5, 0.5]);
        let d = vec![on(&d0, &[0.75, 0.25]), on(&d0, &[0.25, 0.75])];
        let p = ProblemSpec::search("all", d, vec!["f".into()], vec![vec![true, true]]).unwrap();
        assert_eq!(rsd_search(&p, 0.2, 1.0, None, None).unwrap().value, 0.0);
    }

    #[test]
    fn simple_bound_vacuous_when_solved() {
        let d0 = dist(&[0.5, 0.5]);
        let d = vec![on(&d0, &[0.75, 0.25])];
        let p = ProblemSpec::search("one", d, vec!["f".into()], vec![vec![true]]).unwrap();
        let b = simple_lower_bound(&p, &Measure::uniform(1).unwrap(), &d0, 0.2, 0.9).unwrap();
        assert!(b <= 0.0);
    }
}

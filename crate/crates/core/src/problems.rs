//! Problem specifications and instance generators: planted bi-clique,
//! finite-field lines, PAC wrappers and small constructed families.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::{
    bayes_error, expectation, likelihood_hat, pac_lift, same_domain, Domain, FiniteDistribution, FiniteDomain, Measure,
    QueryFn, RangeTag,
};
use crate::error::{Result, SqError};
use crate::norms::{kbar1, kbar2_spectral, rho, NormReport};
use crate::report::Exactness;

/// Largest `n` for which bi-clique distributions are built as explicit tables.
pub const BICLIQUE_TABLE_LIMIT: usize = 12;

/// Largest prime accepted by the exact line audit.
pub const LINE_AUDIT_LIMIT: u64 = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProblemKind {
    Decision,
    Search,
    Verifiable,
    Optimizing,
    Pac,
}

/// A distributional problem over a finite domain.
///
/// `validity[f][i]` says whether solution `f` is valid for `dists[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: ProblemKind,
    pub dists: Vec<FiniteDistribution>,
    pub reference: Option<FiniteDistribution>,
    pub solutions: Vec<String>,
    pub validity: Vec<Vec<bool>>,
    pub verify: Option<Vec<QueryFn>>,
    pub threshold: Option<f64>,
    pub eps: Option<f64>,
}

impl ProblemSpec {
    /// Distinguish membership in `dists` from `reference`.
    pub fn decision(name: &str, dists: Vec<FiniteDistribution>, reference: FiniteDistribution) -> Result<Self> {
        let p = ProblemSpec {
            name: name.into(),
            kind: ProblemKind::Decision,
            dists,
            reference: Some(reference),
            solutions: vec![],
            validity: vec![],
            verify: None,
            threshold: None,
            eps: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn search(name: &str, dists: Vec<FiniteDistribution>, solutions: Vec<String>, validity: Vec<Vec<bool>>) -> Result<Self> {
        let p = ProblemSpec {
            name: name.into(),
            kind: ProblemKind::Search,
            dists,
            reference: None,
            solutions,
            validity,
            verify: None,
            threshold: None,
            eps: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// `f` is valid for `D` iff `D[φ_f] ≤ θ`.
    pub fn verifiable(
        name: &str,
        dists: Vec<FiniteDistribution>,
        solutions: Vec<String>,
        verify: Vec<QueryFn>,
        threshold: f64,
    ) -> Result<Self> {
        let validity = threshold_validity(&dists, &verify, |_| threshold)?;
        let p = ProblemSpec {
            name: name.into(),
            kind: ProblemKind::Verifiable,
            dists,
            reference: None,
            solutions,
            validity,
            verify: Some(verify),
            threshold: Some(threshold),
            eps: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// `f` is valid for `D` iff `D[φ_f] ≤ min_g D[φ_g] + ε`.
    pub fn optimizing(
        name: &str,
        dists: Vec<FiniteDistribution>,
        solutions: Vec<String>,
        verify: Vec<QueryFn>,
        eps: f64,
    ) -> Result<Self> {
        let minima = minima(&dists, &verify)?;
        let validity = threshold_validity(&dists, &verify, |i| minima[i] + eps)?;
        let p = ProblemSpec {
            name: name.into(),
            kind: ProblemKind::Optimizing,
            dists,
            reference: None,
            solutions,
            validity,
            verify: Some(verify),
            threshold: None,
            eps: Some(eps),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_reference(mut self, reference: FiniteDistribution) -> Result<Self> {
        self.reference = Some(reference);
        self.validate()?;
        Ok(self)
    }

    pub fn domain(&self) -> &Domain {
        self.dists[0].domain()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SqError::InvalidProblem(m));
        if self.dists.is_empty() {
            return bad("the class of distributions is empty".into());
        }
        let dom = self.domain();
        if self.dists.iter().any(|d| !same_domain(d.domain(), dom)) {
            return bad("distributions live on different domains".into());
        }
        if let Some(r) = &self.reference {
            if !same_domain(r.domain(), dom) {
                return bad("reference lives on a different domain".into());
            }
        }
        if self.kind == ProblemKind::Decision {
            let Some(r) = &self.reference else { return bad("a decision problem needs a reference".into()) };
            if let Some(i) = self.dists.iter().position(|d| d.weights() == r.weights()) {
                return bad(format!("reference equals class member {i}"));
            }
            return Ok(());
        }
        if self.validity.len() != self.solutions.len() || self.validity.iter().any(|row| row.len() != self.dists.len()) {
            return bad("validity must have one row per solution and one column per distribution".into());
        }
        if let Some(i) = (0..self.dists.len()).find(|&i| !self.validity.iter().any(|row| row[i])) {
            return bad(format!("distribution {i} has no valid solution"));
        }
        match self.kind {
            ProblemKind::Verifiable | ProblemKind::Pac | ProblemKind::Optimizing => {
                let Some(v) = &self.verify else { return bad("verification queries are required".into()) };
                if v.len() != self.solutions.len() {
                    return bad("one verification query per solution is required".into());
                }
                let expected = if self.kind == ProblemKind::Optimizing {
                    let eps = self.eps.ok_or_else(|| SqError::InvalidProblem("optimizing problems need eps".into()))?;
                    let m = minima(&self.dists, v)?;
                    threshold_validity(&self.dists, v, |i| m[i] + eps)?
                } else {
                    let t = self.threshold.ok_or_else(|| SqError::InvalidProblem("verifiable problems need a threshold".into()))?;
                    threshold_validity(&self.dists, v, |_| t)?
                };
                if expected != self.validity {
                    return bad("validity disagrees with the verification rule".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn is_valid(&self, f: usize, dist: usize) -> bool {
        self.validity.get(f).and_then(|row| row.get(dist)).copied().unwrap_or(false)
    }

    /// `Z_f`: indices of the distributions that `f` solves.
    pub fn solved_by(&self, f: usize) -> Vec<usize> {
        (0..self.dists.len()).filter(|&i| self.is_valid(f, i)).collect()
    }

    pub fn valid_solutions(&self, dist: usize) -> Vec<usize> {
        (0..self.solutions.len()).filter(|&f| self.is_valid(f, dist)).collect()
    }

    pub fn verify_query(&self, f: usize) -> Option<&QueryFn> {
        self.verify.as_ref().and_then(|v| v.get(f))
    }

    /// Whether `d0` lies in `D_θ`: no solution passes verification on it.
    pub fn admits_reference(&self, d0: &FiniteDistribution, theta: f64) -> Result<bool> {
        let v = self.verify.as_ref().ok_or_else(|| SqError::InvalidProblem("no verification queries".into()))?;
        for q in v {
            if expectation(d0, q)? <= theta {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The decision problem rewritten as search over `dists ∪ {D0}` with the
    /// two answers "in class" and "reference".
    pub fn as_search(&self) -> Result<ProblemSpec> {
        if self.kind != ProblemKind::Decision {
            return Err(SqError::InvalidProblem("only decision problems convert to search".into()));
        }
        let reference = self.reference.clone().expect("validated decision problem");
        let n = self.dists.len();
        let mut dists = self.dists.clone();
        dists.push(reference.clone());
        let in_class = (0..=n).map(|i| i < n).collect();
        let is_reference = (0..=n).map(|i| i == n).collect();
        let mut p = ProblemSpec::search(
            &format!("{}-search", self.name),
            dists,
            vec!["in_class".into(), "reference".into()],
            vec![in_class, is_reference],
        )?;
        p.reference = Some(reference);
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProblemJson::from(self)).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ProblemJson = serde_json::from_str(text).map_err(|e| SqError::InvalidProblem(format!("bad problem JSON: {e}")))?;
        j.into_spec()
    }
}

fn minima(dists: &[FiniteDistribution], verify: &[QueryFn]) -> Result<Vec<f64>> {
    dists
        .iter()
        .map(|d| verify.iter().map(|q| expectation(d, q)).try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v))))
        .collect()
}

fn threshold_validity<F: Fn(usize) -> f64>(dists: &[FiniteDistribution], verify: &[QueryFn], bound: F) -> Result<Vec<Vec<bool>>> {
    verify
        .iter()
        .map(|q| dists.iter().enumerate().map(|(i, d)| Ok(expectation(d, q)? <= bound(i))).collect())
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    #[serde(default)]
    name: String,
    kind: ProblemKind,
    domain: Vec<String>,
    dists: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<Vec<f64>>,
    #[serde(default)]
    solutions: Vec<String>,
    #[serde(default)]
    validity: Vec<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    verify: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
}

impl From<&ProblemSpec> for ProblemJson {
    fn from(p: &ProblemSpec) -> Self {
        ProblemJson {
            name: p.name.clone(),
            kind: p.kind,
            domain: p.domain().ids().to_vec(),
            dists: p.dists.iter().map(|d| d.weights().to_vec()).collect(),
            reference: p.reference.as_ref().map(|r| r.weights().to_vec()),
            solutions: p.solutions.clone(),
            validity: p.validity.clone(),
            verify: p
                .verify
                .as_ref()
                .map(|v| p.solutions.iter().cloned().zip(v.iter().map(|q| q.values().to_vec())).collect()),
            threshold: p.threshold,
            eps: p.eps,
        }
    }
}

impl ProblemJson {
    fn into_spec(self) -> Result<ProblemSpec> {
        let domain = FiniteDomain::new(self.domain)?;
        let dists = self.dists.into_iter().map(|w| FiniteDistribution::new(domain.clone(), w)).collect::<Result<Vec<_>>>()?;
        let reference = self.reference.map(|w| FiniteDistribution::new(domain.clone(), w)).transpose()?;
        let verify = match self.verify {
            None => None,
            Some(mut map) => Some(
                self.solutions
                    .iter()
                    .map(|s| {
                        let values = map
                            .remove(s)
                            .ok_or_else(|| SqError::InvalidProblem(format!("no verification query for solution {s}")))?;
                        QueryFn::new(domain.clone(), values, RangeTag::Unit)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let spec = ProblemSpec {
            name: self.name,
            kind: self.kind,
            dists,
            reference,
            solutions: self.solutions,
            validity: self.validity,
            verify,
            threshold: self.threshold,
            eps: self.eps,
        };
        spec.validate()?;
        Ok(spec)
    }
}

// ---------------------------------------------------------------------------
// Planted bi-clique

/// `D_S` over `{0,1}^n`: uniform bits, except that with probability `k/n`
/// every coordinate in `S` is forced to 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BicliqueInstance {
    pub n: usize,
    pub plant: Vec<usize>,
}

impl BicliqueInstance {
    pub fn new(n: usize, plant: Vec<usize>) -> Result<Self> {
        if plant.is_empty() {
            return Err(SqError::InvalidArgument("planted set must be non-empty".into()));
        }
        if plant.len() > n || plant.iter().any(|&i| i >= n) || (1..plant.len()).any(|i| plant[i - 1] >= plant[i]) {
            return Err(SqError::InvalidArgument(format!("planted set {plant:?} is not a sorted subset of 0..{n}")));
        }
        if n > 63 {
            return Err(SqError::InvalidArgument("bi-clique dimension above 63".into()));
        }
        Ok(BicliqueInstance { n, plant })
    }

    pub fn k(&self) -> usize {
        self.plant.len()
    }

    fn planted_rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    /// Probability of the point whose coordinate `i` is bit `i` of `x`.
    pub fn probability(&self, x: u64) -> f64 {
        let r = self.planted_rate();
        let mask = bit_mask(&self.plant);
        let background = (1.0 - r) * 0.5f64.powi(self.n as i32);
        if x & mask == mask {
            background + r * 0.5f64.powi((self.n - self.k()) as i32)
        } else {
            background
        }
    }

    /// `Pr[x_i = 1 for all i ∈ T]`.
    pub fn conjunction(&self, t: &[usize]) -> f64 {
        let r = self.planted_rate();
        let outside = t.iter().filter(|i| !self.plant.contains(i)).count();
        (1.0 - r) * 0.5f64.powi(t.len() as i32) + r * 0.5f64.powi(outside as i32)
    }

    /// `E[(−1)^{Σ_{i∈T} x_i}]`.
    pub fn parity(&self, t: &[usize]) -> f64 {
        if t.is_empty() {
            return 1.0;
        }
        if t.iter().all(|i| self.plant.contains(i)) {
            let sign = if t.len() % 2 == 0 { 1.0 } else { -1.0 };
            sign * self.planted_rate()
        } else {
            0.0
        }
    }

    pub fn distribution(&self, domain: &Domain) -> Result<FiniteDistribution> {
        if domain.len() != 1 << self.n {
            return Err(SqError::DomainMismatch(format!("bi-clique domain must have 2^{} points", self.n)));
        }
        FiniteDistribution::new(domain.clone(), (0..1u64 << self.n).map(|x| self.probability(x)).collect())
    }
}

fn bit_mask(set: &[usize]) -> u64 {
    set.iter().fold(0, |m, &i| m | 1 << i)
}

/// `{0,1}^n`, point `x` named by its bits with coordinate 0 first.
pub fn hypercube_domain(n: usize) -> Result<Domain> {
    if n > BICLIQUE_TABLE_LIMIT {
        return Err(SqError::GuardExceeded { guard: "bi-clique explicit table", actual: n, limit: BICLIQUE_TABLE_LIMIT });
    }
    FiniteDomain::new((0..1u64 << n).map(|x| (0..n).map(|i| if (x >> i) & 1 == 1 { '1' } else { '0' }).collect()).collect())
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn set_name(s: &[usize]) -> String {
    let inner: Vec<String> = s.iter().map(usize::to_string).collect();
    format!("{{{}}}", inner.join(","))
}

/// `1[x_i = 1 for all i ∈ set]` as a table.
pub fn all_ones_query(domain: &Domain, n: usize, set: &[usize]) -> Result<QueryFn> {
    let mask = bit_mask(set);
    let values = (0..1u64 << n).map(|x| if x & mask == mask { 1.0 } else { 0.0 }).collect();
    QueryFn::new(domain.clone(), values, RangeTag::Unit)
}

/// The planted family, the uniform reference and the generating instances.
pub struct BicliqueFamily {
    pub domain: Domain,
    pub plants: Vec<Vec<usize>>,
    pub dists: Vec<FiniteDistribution>,
    pub reference: FiniteDistribution,
}

pub fn biclique_family(n: usize, k: usize) -> Result<BicliqueFamily> {
    if k == 0 || k > n {
        return Err(SqError::InvalidArgument(format!("bi-clique needs 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    let domain = hypercube_domain(n)?;
    let plants = k_subsets(n, k);
    let dists = plants
        .iter()
        .map(|s| BicliqueInstance::new(n, s.clone())?.distribution(&domain))
        .collect::<Result<Vec<_>>>()?;
    let reference = FiniteDistribution::uniform(domain.clone());
    Ok(BicliqueFamily { domain, plants, dists, reference })
}

/// Distinguish every planted distribution from uniform.
pub fn biclique_decision(n: usize, k: usize) -> Result<ProblemSpec> {
    let fam = biclique_family(n, k)?;
    ProblemSpec::decision(&format!("biclique-n{n}-k{k}"), fam.dists, fam.reference)
}

/// Recover the planted set exactly.
pub fn biclique_search(n: usize, k: usize) -> Result<ProblemSpec> {
    let fam = biclique_family(n, k)?;
    let m = fam.plants.len();
    let validity = (0..m).map(|f| (0..m).map(|i| i == f).collect()).collect();
    let solutions = fam.plants.iter().map(|s| set_name(s)).collect();
    ProblemSpec::search(&format!("biclique-search-n{n}-k{k}"), fam.dists, solutions, validity)?.with_reference(fam.reference)
}

/// Verifiable bi-clique: solution `T` is checked by the query
/// `1 − 1[x_T all ones]`, valid when its mean is at most `θ`
/// (default `1 − k/n`, so the planted set passes with margin).
pub fn biclique_verifiable(n: usize, k: usize, theta: Option<f64>) -> Result<ProblemSpec> {
    let fam = biclique_family(n, k)?;
    let theta = theta.unwrap_or(1.0 - k as f64 / n as f64);
    let verify = fam
        .plants
        .iter()
        .map(|s| {
            let ones = all_ones_query(&fam.domain, n, s)?;
            QueryFn::new(fam.domain.clone(), ones.values().iter().map(|v| 1.0 - v).collect(), RangeTag::Unit)
        })
        .collect::<Result<Vec<_>>>()?;
    let solutions = fam.plants.iter().map(|s| set_name(s)).collect();
    ProblemSpec::verifiable(&format!("biclique-verifiable-n{n}-k{k}"), fam.dists, solutions, verify, theta)?
        .with_reference(fam.reference)
}

// ---------------------------------------------------------------------------
// Lines over GF(p)

pub fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Marginal {
    Uniform,
    /// Half the mass spread uniformly on the line, half uniformly overall.
    Skewed,
}

/// The concept `ℓ_a(z) = 1[a₁z₁ + a₂ = z₂ mod p]` labeled ±1, with a marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinePInstance {
    pub p: u64,
    pub a: (u64, u64),
    pub marginal: Marginal,
}

impl LinePInstance {
    pub fn new(p: u64, a: (u64, u64), marginal: Marginal) -> Result<Self> {
        if !is_prime(p) {
            return Err(SqError::InvalidArgument(format!("{p} is not prime")));
        }
        if a.0 >= p || a.1 >= p {
            return Err(SqError::InvalidArgument(format!("line coefficients {a:?} outside GF({p})")));
        }
        Ok(LinePInstance { p, a, marginal })
    }

    pub fn on_line(&self, z1: u64, z2: u64) -> bool {
        (self.a.0 * z1 + self.a.1) % self.p == z2
    }

    pub fn label(&self, z1: u64, z2: u64) -> i8 {
        if self.on_line(z1, z2) {
            1
        } else {
            -1
        }
    }

    pub fn marginal_weight(&self, z1: u64, z2: u64) -> f64 {
        let p = self.p as f64;
        match self.marginal {
            Marginal::Uniform => 1.0 / (p * p),
            Marginal::Skewed if self.on_line(z1, z2) => 1.0 / (2.0 * p) + 1.0 / (2.0 * p * p),
            Marginal::Skewed => 1.0 / (2.0 * p * p),
        }
    }

    /// Closed-form density of the labeled example `(z, b)`.
    pub fn density(&self, z1: u64, z2: u64, b: i8) -> f64 {
        if self.label(z1, z2) == b {
            self.marginal_weight(z1, z2)
        } else {
            0.0
        }
    }

    pub fn labels(&self) -> Vec<i8> {
        let p = self.p;
        (0..p * p).map(|z| self.label(z / p, z % p)).collect()
    }

    pub fn marginal_distribution(&self, base: &Domain) -> Result<FiniteDistribution> {
        let p = self.p;
        FiniteDistribution::new(base.clone(), (0..p * p).map(|z| self.marginal_weight(z / p, z % p)).collect())
    }

    /// `P^{ℓ_a}` over the labeled domain.
    pub fn distribution(&self, labeled: &Domain) -> Result<FiniteDistribution> {
        let base = line_base_domain(self.p)?;
        pac_lift(&self.marginal_distribution(&base)?, &self.labels(), labeled)
    }
}

/// `GF(p)²` ordered lexicographically by `(z₁, z₂)`.
pub fn line_base_domain(p: u64) -> Result<Domain> {
    FiniteDomain::new((0..p * p).map(|z| format!("({},{})", z / p, z % p)).collect())
}

/// `GF(p)² × {−1, +1}` ordered by `(z₁, z₂, b)`.
pub fn line_domain(p: u64) -> Result<Domain> {
    let base = line_base_domain(p)?;
    FiniteDomain::labeled(base.ids())
}

pub fn all_lines(p: u64, marginal: Marginal) -> Result<Vec<LinePInstance>> {
    (0..p * p).map(|i| LinePInstance::new(p, (i / p, i % p), marginal)).collect()
}

/// Learning lines: the class `{P^{ℓ_a}}`, hypotheses the lines themselves,
/// verification by the disagreement indicator with threshold `ε`, and the
/// uniform distribution over labeled examples as reference.
pub fn line_family(p: u64, marginal: Marginal, eps: f64) -> Result<ProblemSpec> {
    let labeled = line_domain(p)?;
    let lines = all_lines(p, marginal)?;
    let dists = lines.iter().map(|l| l.distribution(&labeled)).collect::<Result<Vec<_>>>()?;
    let hypotheses: Vec<(String, Vec<i8>)> =
        lines.iter().map(|l| (format!("line({},{})", l.a.0, l.a.1), l.labels())).collect();
    let mut spec = disagreement_problem(&labeled, dists, &hypotheses, eps)?;
    spec.name = format!("line-p{p}-{}", if marginal == Marginal::Uniform { "uniform" } else { "skewed" });
    spec.with_reference(FiniteDistribution::uniform(labeled))
}

fn disagreement_problem(
    labeled: &Domain,
    dists: Vec<FiniteDistribution>,
    hypotheses: &[(String, Vec<i8>)],
    eps: f64,
) -> Result<ProblemSpec> {
    let verify = hypotheses.iter().map(|(_, h)| disagreement_query(labeled, h)).collect::<Result<Vec<_>>>()?;
    let solutions = hypotheses.iter().map(|(n, _)| n.clone()).collect();
    let mut spec = ProblemSpec::verifiable("pac", dists, solutions, verify, eps)?;
    spec.kind = ProblemKind::Pac;
    Ok(spec)
}

/// `φ_h(z, b) = 1[h(z) ≠ b]`.
pub fn disagreement_query(labeled: &Domain, h: &[i8]) -> Result<QueryFn> {
    if labeled.base_points() != Some(h.len()) {
        return Err(SqError::DomainMismatch("hypothesis length differs from the base domain".into()));
    }
    let mut values = vec![0.0; labeled.len()];
    for (z, &hz) in h.iter().enumerate() {
        values[FiniteDomain::labeled_index(z, -hz)] = 1.0;
    }
    QueryFn::new(labeled.clone(), values, RangeTag::Unit)
}

/// Every ±1 labeling of `n` points, in binary counting order.
pub fn all_boolean_functions(n: usize) -> Result<Vec<(String, Vec<i8>)>> {
    if n > 12 {
        return Err(SqError::GuardExceeded { guard: "all Boolean hypotheses", actual: n, limit: 12 });
    }
    Ok((0..1u64 << n)
        .map(|m| {
            let h: Vec<i8> = (0..n).map(|z| if (m >> z) & 1 == 1 { 1 } else { -1 }).collect();
            let name: String = h.iter().map(|b| if *b > 0 { '+' } else { '-' }).collect();
            (name, h)
        })
        .collect())
}

/// PAC learning over a finite class: inputs `P^f` for each marginal and
/// concept, hypotheses (all Boolean functions by default) checked by their
/// disagreement rate against `ε`.
pub fn pac_problem(
    base: &Domain,
    concepts: &[(String, Vec<i8>)],
    marginals: &[FiniteDistribution],
    eps: f64,
    hypotheses: Option<&[(String, Vec<i8>)]>,
) -> Result<ProblemSpec> {
    if concepts.is_empty() || marginals.is_empty() {
        return Err(SqError::InvalidProblem("empty concept class or marginal set".into()));
    }
    let labeled = FiniteDomain::labeled(base.ids())?;
    let mut dists = Vec::new();
    for p in marginals {
        if !same_domain(p.domain(), base) {
            return Err(SqError::DomainMismatch("marginal over a different base domain".into()));
        }
        for (_, f) in concepts {
            dists.push(pac_lift(p, f, &labeled)?);
        }
    }
    let default;
    let hypotheses = match hypotheses {
        Some(h) => h,
        None => {
            default = all_boolean_functions(base.len())?;
            &default
        }
    };
    let mut spec = disagreement_problem(&labeled, dists, hypotheses, eps)?;
    spec.name = "pac".into();
    Ok(spec)
}

/// Whether a labeled reference is admissible for PAC lower bounds: its
/// Bayes error must exceed `ε`.
pub fn pac_admits_reference(d0: &FiniteDistribution, eps: f64) -> Result<bool> {
    Ok(bayes_error(d0)? > eps)
}

// ---------------------------------------------------------------------------
// Line audit

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationRange {
    pub min: f64,
    pub max: f64,
    pub pairs: usize,
}

impl CorrelationRange {
    fn new() -> Self {
        CorrelationRange { min: f64::INFINITY, max: f64::NEG_INFINITY, pairs: 0 }
    }

    fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.pairs += 1;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LineAudit {
    pub p: u64,
    pub same_pair: CorrelationRange,
    pub parallel: CorrelationRange,
    pub non_parallel: CorrelationRange,
    pub same_pair_bound: f64,
    pub parallel_bound: f64,
    pub rho: f64,
    pub rho_bound: f64,
    pub kbar1: NormReport,
    pub kbar1_bound: f64,
    /// `1/κ̄1` lower bound implied by the κ̄1 bound.
    pub combined_dimension_lower: f64,
    pub checks: BTreeMap<String, bool>,
}

impl LineAudit {
    pub fn passed(&self) -> bool {
        self.checks.values().all(|v| *v)
    }
}

/// Exact correlation audit of the skewed-marginal line family against the
/// uniform reference.
pub fn line_audit(p: u64) -> Result<LineAudit> {
    if !is_prime(p) {
        return Err(SqError::InvalidArgument(format!("{p} is not prime")));
    }
    if p > LINE_AUDIT_LIMIT {
        return Err(SqError::GuardExceeded { guard: "line audit prime", actual: p as usize, limit: LINE_AUDIT_LIMIT as usize });
    }
    let labeled = line_domain(p)?;
    let d0 = FiniteDistribution::uniform(labeled.clone());
    let lines = all_lines(p, Marginal::Skewed)?;
    let dists = lines.iter().map(|l| l.distribution(&labeled)).collect::<Result<Vec<_>>>()?;
    let hats = dists.iter().map(|d| likelihood_hat(d, &d0)).collect::<Result<Vec<_>>>()?;
    let w = d0.weights();
    let (mut same, mut parallel, mut other) = (CorrelationRange::new(), CorrelationRange::new(), CorrelationRange::new());
    let mut total = 0.0;
    for (i, a) in lines.iter().enumerate() {
        for (j, b) in lines.iter().enumerate() {
            let c: f64 = hats[i].iter().zip(&hats[j]).zip(w).map(|((x, y), q)| q * x * y).sum();
            total += c.abs();
            if i == j {
                same.push(c.abs());
            } else if a.a.0 == b.a.0 {
                parallel.push(c.abs());
            } else {
                other.push(c.abs());
            }
        }
    }
    let m = dists.len() as f64;
    let rho_value = total / (m * m);
    let pf = p as f64;
    let mu = Measure::uniform(dists.len())?;
    let kbar1_report = match kbar1(&dists, &mu, &d0) {
        Ok(r) => r,
        Err(SqError::GuardExceeded { .. }) => {
            // κ̄1 ≤ κ̄2 (every [−1,1] query has D0-norm at most 1), and κ̄2 is
            // bounded by both √ρ and the spectral form.
            let spectral = kbar2_spectral(&dists, &mu, &d0)?;
            let via_rho = rho(&dists, &d0)?.value.sqrt();
            let (value, certificate) = if spectral.value < via_rho {
                (spectral.value, spectral.certificate)
            } else {
                (via_rho, Default::default())
            };
            NormReport { value, exactness: Exactness::UpperBound, certificate }
        }
        Err(e) => return Err(e),
    };
    let kbar1_bound = 4.0 * (2.0 / pf).sqrt();
    let tol = 1e-10;
    let mut checks = BTreeMap::new();
    let same_value = (pf + 1.0) / 2.0;
    let parallel_value = 0.5 + 1.0 / pf;
    let other_value = 1.0 / (pf * pf);
    checks.insert("same_pair_exact".into(), (same.min - same_value).abs() <= tol && (same.max - same_value).abs() <= tol);
    checks.insert("same_pair_within_bound".into(), same.max <= pf / 2.0 + 1.0 + tol);
    checks.insert(
        "parallel_exact".into(),
        (parallel.min - parallel_value).abs() <= tol && (parallel.max - parallel_value).abs() <= tol,
    );
    checks.insert("parallel_within_bound".into(), parallel.max <= 1.0 + tol);
    checks.insert("non_parallel_exact".into(), (other.min - other_value).abs() <= tol && (other.max - other_value).abs() <= tol);
    checks.insert("rho_within_bound".into(), rho_value <= 2.0 / pf + tol);
    checks.insert("kbar1_within_bound".into(), kbar1_report.value <= kbar1_bound + tol);
    Ok(LineAudit {
        p,
        same_pair: same,
        parallel,
        non_parallel: other,
        same_pair_bound: pf / 2.0 + 1.0,
        parallel_bound: 1.0,
        rho: rho_value,
        rho_bound: 2.0 / pf,
        combined_dimension_lower: 1.0 / kbar1_bound,
        kbar1: kbar1_report,
        kbar1_bound,
        checks,
    })
}

// ---------------------------------------------------------------------------
// Constructed families

/// `k` distributions on `k` points, each pushed toward its own point:
/// `D_i = U + (1/(2k))(k e_i − 1)`. Any single query separates at most one
/// of them from uniform at tolerances between the pair margin
/// `max(1/2, (k−2)/k)` and the singleton margin `(k−1)/k`.
pub fn spike_family(k: usize) -> Result<ProblemSpec> {
    if k < 2 {
        return Err(SqError::InvalidArgument("spike family needs k ≥ 2".into()));
    }
    let domain = FiniteDomain::indexed(k)?;
    let c = 0.5 / k as f64;
    let dists = (0..k)
        .map(|i| {
            let w = (0..k).map(|x| 1.0 / k as f64 + if x == i { c * (k as f64 - 1.0) } else { -c }).collect();
            FiniteDistribution::normalized(domain.clone(), w)
        })
        .collect::<Result<Vec<_>>>()?;
    ProblemSpec::decision(&format!("spike-k{k}"), dists, FiniteDistribution::uniform(domain))
}

//! Finite domains, distributions over them, bounded queries, measures over
//! finite index sets, and the divergences used by the rest of the crate.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SqError};

/// Tolerance on `|Σ w − 1|` for a vector to count as a distribution.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Largest domain on which brute-force enumerations over `{±1}^X` run.
pub const ENUMERATION_DOMAIN_LIMIT: usize = 24;

/// Ordered list of opaque point identifiers.
///
/// A domain built with [`FiniteDomain::labeled`] is the product `Z × {−1, +1}`
/// laid out as `(z, −1), (z, +1)` for each base point `z` in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteDomain {
    ids: Vec<String>,
    base_points: Option<usize>,
}

pub type Domain = Arc<FiniteDomain>;

impl FiniteDomain {
    pub fn new(ids: Vec<String>) -> Result<Domain> {
        if ids.is_empty() {
            return Err(SqError::InvalidArgument("domain must have at least one element".into()));
        }
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(SqError::InvalidArgument(format!("duplicate domain identifier `{}`", w[0])));
        }
        let base_points = detect_labeled(&ids);
        Ok(Arc::new(FiniteDomain { ids, base_points }))
    }

    /// Domain `{0, …, n−1}` with decimal identifiers.
    pub fn indexed(n: usize) -> Result<Domain> {
        FiniteDomain::new((0..n).map(|i| i.to_string()).collect())
    }

    /// Labeled product `Z × {−1, +1}` over the given base identifiers.
    pub fn labeled(base: &[String]) -> Result<Domain> {
        let ids = base
            .iter()
            .flat_map(|z| [format!("{z}|-1"), format!("{z}|+1")])
            .collect();
        FiniteDomain::new(ids)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Number of base points when this is a labeled product domain.
    pub fn base_points(&self) -> Option<usize> {
        self.base_points
    }

    /// Domain index of `(z, b)` in a labeled domain.
    pub fn labeled_index(z: usize, label: i8) -> usize {
        2 * z + usize::from(label > 0)
    }
}

fn detect_labeled(ids: &[String]) -> Option<usize> {
    if ids.len() % 2 != 0 {
        return None;
    }
    for pair in ids.chunks(2) {
        let neg = pair[0].strip_suffix("|-1")?;
        let pos = pair[1].strip_suffix("|+1")?;
        if neg != pos {
            return None;
        }
    }
    Some(ids.len() / 2)
}

pub fn same_domain(a: &Domain, b: &Domain) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_domain(a: &Domain, b: &Domain, what: &str) -> Result<()> {
    if same_domain(a, b) {
        Ok(())
    } else {
        Err(SqError::DomainMismatch(what.to_string()))
    }
}

/// Compensated summation, used wherever a normalization is checked.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    domain: Domain,
    weights: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(domain: Domain, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != domain.len() {
            return Err(SqError::DomainMismatch(format!(
                "{} weights for a domain of size {}",
                weights.len(),
                domain.len()
            )));
        }
        validate_probability_vector(&weights).map_err(SqError::InvalidDistribution)?;
        Ok(FiniteDistribution { domain, weights })
    }

    /// Rescales non-negative weights to sum to one.
    pub fn normalized(domain: Domain, mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SqError::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total = kahan_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(SqError::InvalidDistribution("all weights are zero".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        FiniteDistribution::new(domain, weights)
    }

    pub fn uniform(domain: Domain) -> Self {
        let n = domain.len();
        FiniteDistribution { weights: vec![1.0 / n as f64; n], domain }
    }

    pub fn point_mass(domain: Domain, index: usize) -> Result<Self> {
        if index >= domain.len() {
            return Err(SqError::InvalidArgument(format!("point {index} outside domain")));
        }
        let mut weights = vec![0.0; domain.len()];
        weights[index] = 1.0;
        Ok(FiniteDistribution { domain, weights })
    }

    /// Mixture `Σ_i c_i D_i` of distributions sharing one domain.
    pub fn mixture(dists: &[FiniteDistribution], coefficients: &[f64]) -> Result<Self> {
        let first = dists
            .first()
            .ok_or_else(|| SqError::InvalidArgument("mixture of no distributions".into()))?;
        if coefficients.len() != dists.len() {
            return Err(SqError::InvalidArgument("one coefficient per distribution required".into()));
        }
        let mut weights = vec![0.0; first.len()];
        for (d, &c) in dists.iter().zip(coefficients) {
            check_domain(&first.domain, &d.domain, "mixture components")?;
            for (w, &p) in weights.iter_mut().zip(&d.weights) {
                *w += c * p;
            }
        }
        FiniteDistribution::normalized(first.domain.clone(), weights)
    }

    pub fn uniform_mixture(dists: &[FiniteDistribution]) -> Result<Self> {
        let c = vec![1.0 / dists.len().max(1) as f64; dists.len()];
        FiniteDistribution::mixture(dists, &c)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i)
    }

    pub fn l1_distance(&self, other: &FiniteDistribution) -> Result<f64> {
        check_domain(&self.domain, &other.domain, "l1 distance")?;
        Ok(self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum())
    }
}

pub(crate) fn validate_probability_vector(w: &[f64]) -> std::result::Result<(), String> {
    if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(format!("weight {v} at index {i} is negative or non-finite"));
    }
    let total = kahan_sum(w.iter().copied());
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(format!("weights sum to {total}, not 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RangeTag {
    /// Values in `[−1, 1]`.
    Signed,
    /// Values in `[0, 1]`.
    Unit,
}

impl RangeTag {
    pub fn contains(self, v: f64) -> bool {
        match self {
            RangeTag::Signed => (-1.0..=1.0).contains(&v),
            RangeTag::Unit => (0.0..=1.0).contains(&v),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RangeTag::Signed => "[-1,1]",
            RangeTag::Unit => "[0,1]",
        }
    }
}

/// A bounded query given by its value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryFn {
    domain: Domain,
    values: Vec<f64>,
    range: RangeTag,
}

impl QueryFn {
    pub fn new(domain: Domain, values: Vec<f64>, range: RangeTag) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(SqError::DomainMismatch(format!(
                "{} query values for a domain of size {}",
                values.len(),
                domain.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !range.contains(**v)) {
            return Err(SqError::RangeViolation { index, value, range: range.name() });
        }
        Ok(QueryFn { domain, values, range })
    }

    pub fn constant(domain: Domain, c: f64, range: RangeTag) -> Result<Self> {
        let n = domain.len();
        QueryFn::new(domain, vec![c; n], range)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn range(&self) -> RangeTag {
        self.range
    }

    pub fn negated(&self) -> Result<QueryFn> {
        QueryFn::new(self.domain.clone(), self.values.iter().map(|v| -v).collect(), RangeTag::Signed)
    }

    /// Reinterprets a unit-range query as a signed one (always valid).
    pub fn as_signed(&self) -> QueryFn {
        QueryFn { domain: self.domain.clone(), values: self.values.clone(), range: RangeTag::Signed }
    }
}

/// `D[φ] = Σ_x D(x) φ(x)`.
pub fn expectation(d: &FiniteDistribution, phi: &QueryFn) -> Result<f64> {
    check_domain(&d.domain, &phi.domain, "expectation")?;
    Ok(dot(&d.weights, &phi.values))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Probability weights over a finite index set (distributions, solutions or
/// queries, depending on the caller).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    weights: Vec<f64>,
}

impl Measure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_probability_vector(&weights).map_err(SqError::InvalidArgument)?;
        Ok(Measure { weights })
    }

    /// Rescales non-negative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total = kahan_sum(weights.iter().copied());
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || total <= 0.0 {
            return Err(SqError::InvalidArgument("measure weights must be non-negative with positive sum".into()));
        }
        Measure::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(SqError::InvalidArgument("uniform measure over an empty set".into()));
        }
        Ok(Measure { weights: vec![1.0 / n as f64; n] })
    }

    pub fn point(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(SqError::InvalidArgument(format!("point {index} outside a set of {n}")));
        }
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Ok(Measure { weights })
    }

    /// Uniform over the listed indices of an `n`-element set.
    pub fn uniform_over(n: usize, subset: &[usize]) -> Result<Self> {
        let mut weights = vec![0.0; n];
        for &i in subset {
            if i >= n {
                return Err(SqError::InvalidArgument(format!("index {i} outside a set of {n}")));
            }
            weights[i] = 1.0;
        }
        Measure::normalized(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    pub fn mass(&self, indices: impl IntoIterator<Item = usize>) -> f64 {
        indices.into_iter().map(|i| self.weights[i]).sum()
    }

    /// Conditional measure on `subset`; `None` when the subset has no mass.
    pub fn restricted(&self, subset: &[usize]) -> Option<Measure> {
        let mut w = vec![0.0; self.weights.len()];
        for &i in subset {
            w[i] = self.weights[i];
        }
        Measure::normalized(w).ok()
    }
}

/// `KL(D ‖ D') = Σ_x D(x) ln(D(x)/D'(x))`.
pub fn kl_divergence(d: &FiniteDistribution, d_prime: &FiniteDistribution) -> Result<f64> {
    check_domain(&d.domain, &d_prime.domain, "KL divergence")?;
    let mut total = 0.0;
    for (x, (&p, &q)) in d.weights.iter().zip(&d_prime.weights).enumerate() {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(SqError::SupportViolation(x));
        }
        total += p * (p / q).ln();
    }
    Ok(total.max(0.0))
}

/// `max_D KL(D ‖ D1)` for `D1` the uniform mixture of `dists`, together with
/// `D1`. This bounds the KL radius from above.
pub fn kl_radius_upper(dists: &[FiniteDistribution]) -> Result<(f64, FiniteDistribution)> {
    let center = FiniteDistribution::uniform_mixture(dists)?;
    let radius = max_kl_to(dists, &center)?;
    Ok((radius, center))
}

/// Best of the uniform mixture and the supplied extra centers.
pub fn kl_radius_best(
    dists: &[FiniteDistribution],
    extra_centers: &[FiniteDistribution],
) -> Result<(f64, FiniteDistribution)> {
    let mut best = kl_radius_upper(dists)?;
    for c in extra_centers {
        match max_kl_to(dists, c) {
            Ok(r) if r < best.0 => best = (r, c.clone()),
            Ok(_) | Err(SqError::SupportViolation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

fn max_kl_to(dists: &[FiniteDistribution], center: &FiniteDistribution) -> Result<f64> {
    let mut radius: f64 = 0.0;
    for d in dists {
        radius = radius.max(kl_divergence(d, center)?);
    }
    Ok(radius)
}

/// Pointwise `D̂(x) = D(x)/D0(x) − 1`; zero where `D0(x) = 0`.
pub fn likelihood_hat(d: &FiniteDistribution, d0: &FiniteDistribution) -> Result<Vec<f64>> {
    check_domain(&d.domain, &d0.domain, "likelihood ratio")?;
    d.weights
        .iter()
        .zip(&d0.weights)
        .enumerate()
        .map(|(x, (&p, &q))| {
            if q > 0.0 {
                Ok(p / q - 1.0)
            } else if p > 0.0 {
                Err(SqError::SupportViolation(x))
            } else {
                Ok(0.0)
            }
        })
        .collect()
}

/// `Σ_z min(D0(z, +1), D0(z, −1))` over a labeled domain.
pub fn bayes_error(d0: &FiniteDistribution) -> Result<f64> {
    if d0.domain.base_points().is_none() {
        return Err(SqError::DomainMismatch("bayes error needs a labeled Z×{±1} domain".into()));
    }
    Ok(d0.weights.chunks(2).map(|c| c[0].min(c[1])).sum())
}

/// `P^f` on `labeled`: mass `P(z)` on `(z, f(z))`.
pub fn pac_lift(p: &FiniteDistribution, labels: &[i8], labeled: &Domain) -> Result<FiniteDistribution> {
    let base = labeled
        .base_points()
        .ok_or_else(|| SqError::DomainMismatch("target domain is not labeled".into()))?;
    if base != p.len() || labels.len() != p.len() {
        return Err(SqError::DomainMismatch("labeled domain, marginal and labels disagree in size".into()));
    }
    let mut weights = vec![0.0; labeled.len()];
    for (z, (&w, &b)) in p.weights.iter().zip(labels).enumerate() {
        if b != 1 && b != -1 {
            return Err(SqError::InvalidArgument(format!("label {b} is not ±1")));
        }
        weights[FiniteDomain::labeled_index(z, b)] = w;
    }
    Ok(FiniteDistribution { domain: labeled.clone(), weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> Domain {
        FiniteDomain::indexed(2).unwrap()
    }

    #[test]
    fn expectation_of_signed_query() {
        let d = FiniteDistribution::new(two(), vec![0.75, 0.25]).unwrap();
        let phi = QueryFn::new(two(), vec![1.0, -1.0], RangeTag::Signed).unwrap();
        assert_eq!(expectation(&d, &phi).unwrap(), 0.5);
        let one = QueryFn::constant(two(), 1.0, RangeTag::Unit).unwrap();
        assert_eq!(expectation(&d, &one).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FiniteDistribution::new(two(), vec![0.7, 0.2]).is_err());
        assert!(FiniteDistribution::new(two(), vec![1.1, -0.1]).is_err());
        assert!(QueryFn::new(two(), vec![0.5, -0.5], RangeTag::Unit).is_err());
        assert!(FiniteDomain::new(vec!["a".into(), "a".into()]).is_err());
        let other = FiniteDomain::new(vec!["x".into(), "y".into()]).unwrap();
        let d = FiniteDistribution::uniform(two());
        let phi = QueryFn::constant(other, 1.0, RangeTag::Signed).unwrap();
        assert!(matches!(expectation(&d, &phi), Err(SqError::DomainMismatch(_))));
    }

    #[test]
    fn kl_values() {
        let dom = FiniteDomain::indexed(4).unwrap();
        let u = FiniteDistribution::uniform(dom.clone());
        let pm = FiniteDistribution::point_mass(dom, 2).unwrap();
        assert_eq!(kl_divergence(&u, &u).unwrap(), 0.0);
        assert!((kl_divergence(&pm, &u).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(kl_divergence(&u, &pm), Err(SqError::SupportViolation(0))));
    }

    #[test]
    fn radius_of_point_masses_is_log_count() {
        let dom = FiniteDomain::indexed(5).unwrap();
        let dists: Vec<_> = (0..5).map(|i| FiniteDistribution::point_mass(dom.clone(), i).unwrap()).collect();
        let (r, center) = kl_radius_upper(&dists).unwrap();
        assert!((r - 5f64.ln()).abs() < 1e-12);
        assert_eq!(center.weights(), &[0.2; 5]);
    }

    #[test]
    fn likelihood_ratio_has_zero_mean() {
        let dom = FiniteDomain::indexed(3).unwrap();
        let d0 = FiniteDistribution::new(dom.clone(), vec![0.5, 0.3, 0.2]).unwrap();
        let d = FiniteDistribution::new(dom.clone(), vec![0.1, 0.6, 0.3]).unwrap();
        let h = likelihood_hat(&d, &d0).unwrap();
        assert!(dot(d0.weights(), &h).abs() < 1e-15);
        assert!(likelihood_hat(&d0, &d0).unwrap().iter().all(|v| *v == 0.0));
        let pm = FiniteDistribution::point_mass(dom, 0).unwrap();
        assert!(matches!(likelihood_hat(&d, &pm), Err(SqError::SupportViolation(1))));
    }

    #[test]
    fn bayes_error_examples() {
        let base: Vec<String> = vec!["z1".into(), "z2".into()];
        let lab = FiniteDomain::labeled(&base).unwrap();
        assert_eq!(lab.base_points(), Some(2));
        let d0 = FiniteDistribution::new(lab.clone(), vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        assert!((bayes_error(&d0).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(bayes_error(&FiniteDistribution::uniform(lab.clone())).unwrap(), 0.5);
        assert!(bayes_error(&FiniteDistribution::uniform(two())).is_err());

        let zdom = FiniteDomain::new(base).unwrap();
        let p = FiniteDistribution::uniform(zdom);
        let pf = pac_lift(&p, &[1, 1], &lab).unwrap();
        assert_eq!(pf.weights(), &[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(bayes_error(&pf).unwrap(), 0.0);
    }
}

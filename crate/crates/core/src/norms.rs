//! Average discrimination norms, average correlation and covered fractions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{dot, likelihood_hat, FiniteDistribution, Measure, ENUMERATION_DOMAIN_LIMIT};
use crate::error::{Result, SqError};
use crate::games::{achievable_subsets, binary_seeds, deltas, discrimination, Kappa, ACHIEVE_SLACK, SUBSET_LIMIT};
use crate::report::{deserialize_extended, serialize_extended, Exactness};

/// Largest `2^k` sign enumeration for the norms computed over signs.
pub const SIGN_LIMIT: usize = 20;

/// Largest domain for which every binary query vertex is tried.
pub const VERTEX_LIMIT: usize = 20;

/// Grid resolution for the square-root-scale refinement.
pub const GRID_STEPS: usize = 16;

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub query: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub signs: Option<Vec<i8>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    #[serde(serialize_with = "serialize_extended", deserialize_with = "deserialize_extended")]
    pub value: f64,
    pub exactness: Exactness,
    pub certificate: Certificate,
}

impl NormReport {
    fn new(value: f64, exactness: Exactness, certificate: Certificate) -> Self {
        NormReport { value, exactness, certificate }
    }
}

fn check_measure(dists: &[FiniteDistribution], mu: &Measure) -> Result<()> {
    if mu.len() != dists.len() {
        return Err(SqError::InvalidArgument(format!(
            "measure has {} weights for {} distributions",
            mu.len(),
            dists.len()
        )));
    }
    Ok(())
}

/// `Σ_D μ(D) |⟨φ, D − D0⟩|`.
pub fn average_discrimination(rows: &[Vec<f64>], mu: &[f64], phi: &[f64]) -> f64 {
    rows.iter().zip(mu).map(|(r, m)| m * dot(r, phi).abs()).sum()
}

/// `Σ_D μ(D) |√D[φ] − √D0[φ]|` for `φ : X → [0, 1]`.
pub fn average_root_discrimination(dists: &[FiniteDistribution], mu: &[f64], d0: &FiniteDistribution, phi: &[f64]) -> f64 {
    let base = dot(d0.weights(), phi).max(0.0).sqrt();
    dists
        .iter()
        .zip(mu)
        .filter(|(_, m)| **m > 0.0)
        .map(|(d, m)| m * (dot(d.weights(), phi).max(0.0).sqrt() - base).abs())
        .sum()
}

/// Index of the best candidate; ties resolve to the lowest index.
fn argmax_par<F: Fn(u64) -> f64 + Sync>(count: u64, f: F) -> (u64, f64) {
    (0..count)
        .into_par_iter()
        .map(|i| (i, f(i)))
        .reduce(
            || (u64::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        )
}

fn sign_vector(bits: u64, len: usize) -> Vec<i8> {
    (0..len).map(|i| if (bits >> i) & 1 == 1 { -1 } else { 1 }).collect()
}

/// Exact `κ̄1(μ, D0) = max_{φ ∈ [−1,1]^X} E_μ |D[φ] − D0[φ]|`.
///
/// The objective is convex in `φ`, so the maximum sits at a vertex of the
/// cube. Enumerates either those vertices or the sign patterns over the
/// support of `μ`, whichever is fewer.
pub fn kbar1(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution) -> Result<NormReport> {
    check_measure(dists, mu)?;
    let support = mu.support();
    let all = deltas(dists, d0)?;
    let rows: Vec<Vec<f64>> = support.iter().map(|&i| all[i].clone()).collect();
    let weights: Vec<f64> = support.iter().map(|&i| mu.weights()[i]).collect();
    let nx = d0.len();
    let k = rows.len();
    if k == 0 {
        return Ok(NormReport::new(0.0, Exactness::Exact, Certificate { query: Some(vec![1.0; nx]), ..Default::default() }));
    }
    let by_signs = k <= SIGN_LIMIT && (k < nx || nx > ENUMERATION_DOMAIN_LIMIT);
    if by_signs {
        // The first sign is fixed: s and −s give the same norm.
        let (bits, _) = argmax_par(1u64 << (k - 1), |b| {
            let s = sign_vector(b << 1, k);
            signed_combination(&rows, &weights, &s).iter().map(|v| v.abs()).sum()
        });
        let s = sign_vector(bits << 1, k);
        let g = signed_combination(&rows, &weights, &s);
        let phi: Vec<f64> = g.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let value = average_discrimination(&rows, &weights, &phi);
        let mut signs = vec![0i8; dists.len()];
        for (j, &i) in support.iter().enumerate() {
            signs[i] = s[j];
        }
        return Ok(NormReport::new(value, Exactness::Exact, Certificate { query: Some(phi), signs: Some(signs), subset: None }));
    }
    if nx > ENUMERATION_DOMAIN_LIMIT {
        return Err(SqError::GuardExceeded { guard: "kbar1 enumeration", actual: nx.min(k), limit: ENUMERATION_DOMAIN_LIMIT });
    }
    let (bits, _) = argmax_par(1u64 << (nx - 1), |b| {
        let phi = sign_vector(b << 1, nx).into_iter().map(f64::from).collect::<Vec<_>>();
        average_discrimination(&rows, &weights, &phi)
    });
    let phi: Vec<f64> = sign_vector(bits << 1, nx).into_iter().map(f64::from).collect();
    let value = average_discrimination(&rows, &weights, &phi);
    Ok(NormReport::new(value, Exactness::Exact, Certificate { query: Some(phi), ..Default::default() }))
}

fn signed_combination(rows: &[Vec<f64>], weights: &[f64], signs: &[i8]) -> Vec<f64> {
    let mut g = vec![0.0; rows[0].len()];
    for ((r, w), s) in rows.iter().zip(weights).zip(signs) {
        let c = w * f64::from(*s);
        for (gx, rx) in g.iter_mut().zip(r) {
            *gx += c * rx;
        }
    }
    g
}

fn d0_norm(g: &[f64], d0: &[f64]) -> f64 {
    g.iter().zip(d0).map(|(v, p)| p * v * v).sum::<f64>().sqrt()
}

fn hats(dists: &[FiniteDistribution], support: &[usize], d0: &FiniteDistribution) -> Result<Vec<Vec<f64>>> {
    support.iter().map(|&i| likelihood_hat(&dists[i], d0)).collect()
}

/// Exact `κ̄2(μ, D0) = max_{‖φ‖_{D0} = 1} E_μ |D[φ] − D0[φ]|`, computed as
/// `max_s ‖Σ_D μ(D) s_D D̂‖_{D0}` over sign vectors `s`.
pub fn kbar2(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution) -> Result<NormReport> {
    check_measure(dists, mu)?;
    let support = mu.support();
    let k = support.len();
    if k > SIGN_LIMIT {
        return Err(SqError::GuardExceeded { guard: "kbar2 sign enumeration", actual: k, limit: SIGN_LIMIT });
    }
    let h = hats(dists, &support, d0)?;
    let weights: Vec<f64> = support.iter().map(|&i| mu.weights()[i]).collect();
    if k == 0 {
        return Ok(NormReport::new(0.0, Exactness::Exact, Certificate::default()));
    }
    let (bits, _) = argmax_par(1u64 << (k - 1), |b| {
        d0_norm(&signed_combination(&h, &weights, &sign_vector(b << 1, k)), d0.weights())
    });
    let s = sign_vector(bits << 1, k);
    let g = signed_combination(&h, &weights, &s);
    let norm = d0_norm(&g, d0.weights());
    let mut signs = vec![0i8; dists.len()];
    for (j, &i) in support.iter().enumerate() {
        signs[i] = s[j];
    }
    if norm == 0.0 {
        return Ok(NormReport::new(0.0, Exactness::Exact, Certificate { signs: Some(signs), ..Default::default() }));
    }
    let phi: Vec<f64> = g.iter().map(|v| v / norm).collect();
    let all = deltas(dists, d0)?;
    let value: f64 = mu.weights().iter().zip(&all).map(|(m, r)| m * dot(r, &phi).abs()).sum();
    Ok(NormReport::new(value, Exactness::Exact, Certificate { query: Some(phi), signs: Some(signs), subset: None }))
}

/// `G[i][j] = D0[D̂_i D̂_j]` over the listed distributions.
pub fn correlation_matrix(dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Result<Vec<Vec<f64>>> {
    let support: Vec<usize> = (0..dists.len()).collect();
    let h = hats(dists, &support, d0)?;
    let w = d0.weights();
    Ok(h
        .par_iter()
        .map(|a| h.iter().map(|b| a.iter().zip(b).zip(w).map(|((x, y), p)| p * x * y).sum()).collect())
        .collect())
}

/// Spectral form `max_{‖φ‖_{D0} = 1} (E_μ (D[φ] − D0[φ])²)^{1/2}`, the top
/// singular value of `B_μ^{1/2} A B_{D0}^{−1/2}`, by power iteration on the
/// weighted correlation matrix.
pub fn kbar2_spectral(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution) -> Result<NormReport> {
    check_measure(dists, mu)?;
    let support = mu.support();
    let k = support.len();
    if k == 0 {
        return Ok(NormReport::new(0.0, Exactness::Exact, Certificate::default()));
    }
    let sub: Vec<FiniteDistribution> = support.iter().map(|&i| dists[i].clone()).collect();
    let g = correlation_matrix(&sub, d0)?;
    let root: Vec<f64> = support.iter().map(|&i| mu.weights()[i].sqrt()).collect();
    let h: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| root[i] * g[i][j] * root[j]).collect()).collect();
    let (lambda, u) = top_eigen(&h);
    let value = lambda.max(0.0).sqrt();
    if value == 0.0 {
        return Ok(NormReport::new(0.0, Exactness::Exact, Certificate::default()));
    }
    // Right singular vector mapped back to a function on X.
    let hat_rows = hats(dists, &support, d0)?;
    let coeffs: Vec<f64> = (0..k).map(|i| root[i] * u[i]).collect();
    let phi_raw = signed_combination_f(&hat_rows, &coeffs);
    let norm = d0_norm(&phi_raw, d0.weights());
    let phi: Vec<f64> = phi_raw.iter().map(|v| v / norm).collect();
    Ok(NormReport::new(value, Exactness::Exact, Certificate { query: Some(phi), ..Default::default() }))
}

fn signed_combination_f(rows: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; rows[0].len()];
    for (r, c) in rows.iter().zip(coeffs) {
        for (gx, rx) in g.iter_mut().zip(r) {
            *gx += c * rx;
        }
    }
    g
}

/// Largest eigenpair of a symmetric positive semidefinite matrix.
pub fn top_eigen(h: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let k = h.len();
    let scale = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        let mut e = vec![0.0; k];
        e[0] = 1.0;
        return (0.0, e);
    }
    // Deterministic start with no symmetry, so it is not orthogonal to the
    // top eigenvector except on a measure-zero set of inputs.
    let mut v: Vec<f64> = (0..k).map(|i| 1.0 + (i as f64 + 1.0).sqrt() / (k as f64 + 1.0)).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let mut w: Vec<f64> = h.iter().map(|row| dot(row, &v)).collect();
        let next = dot(&w, &v);
        let n = normalize(&mut w);
        if n == 0.0 {
            return (0.0, v);
        }
        let residual: f64 = h
            .iter()
            .zip(&w)
            .map(|(row, wi)| (dot(row, &w) - next * wi).powi(2))
            .sum::<f64>()
            .sqrt();
        v = w;
        let converged = (next - lambda).abs() <= POWER_TOL * next.abs() && residual <= POWER_TOL.sqrt() * scale;
        lambda = next;
        if converged {
            break;
        }
    }
    let hv: Vec<f64> = h.iter().map(|row| dot(row, &v)).collect();
    (dot(&hv, &v), v)
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// `ρ(D, D0) = |D|^{-2} Σ_{D,D'} |D0[D̂ D̂']|`.
pub fn rho(dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Result<NormReport> {
    if dists.is_empty() {
        return Ok(NormReport::new(0.0, Exactness::Exact, Certificate::default()));
    }
    rho_weighted(dists, &Measure::uniform(dists.len())?, d0)
}

/// `Σ_{D,D'} μ(D) μ(D') |D0[D̂ D̂']|`; the uniform measure gives `ρ`.
pub fn rho_weighted(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution) -> Result<NormReport> {
    check_measure(dists, mu)?;
    let support = mu.support();
    let sub: Vec<FiniteDistribution> = support.iter().map(|&i| dists[i].clone()).collect();
    let g = correlation_matrix(&sub, d0)?;
    let w: Vec<f64> = support.iter().map(|&i| mu.weights()[i]).collect();
    let value = g.iter().enumerate().map(|(i, row)| row.iter().zip(&w).map(|(v, wj)| w[i] * wj * v.abs()).sum::<f64>()).sum();
    Ok(NormReport::new(value, Exactness::Exact, Certificate { subset: Some(support), ..Default::default() }))
}

/// Binary query vertices when the domain is small, otherwise the threshold
/// queries `1[D > D0]`, `1[D < D0]`.
fn vertex_candidates(dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Vec<Vec<f64>> {
    let nx = d0.len();
    if nx <= VERTEX_LIMIT {
        (1u64..(1 << nx)).map(|bits| (0..nx).map(|x| ((bits >> x) & 1) as f64).collect()).collect()
    } else {
        binary_seeds(dists, d0)
    }
}

/// One pass of coordinate ascent over the grid `{0, 1/16, …, 1}`.
fn grid_refine<F: Fn(&[f64]) -> f64>(start: &[f64], objective: F) -> (Vec<f64>, f64) {
    let mut phi = start.to_vec();
    let mut best = objective(&phi);
    for x in 0..phi.len() {
        let keep = phi[x];
        let mut chosen = keep;
        for step in 0..=GRID_STEPS {
            phi[x] = step as f64 / GRID_STEPS as f64;
            let v = objective(&phi);
            if v > best {
                best = v;
                chosen = phi[x];
            }
        }
        phi[x] = chosen;
    }
    (phi, best)
}

/// Lower bound on `κ̄v(μ, D0) = max_{φ : X → [0,1]} E_μ |√D[φ] − √D0[φ]|`:
/// best binary vertex, then one round of grid coordinate ascent.
pub fn kbarv(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution) -> Result<NormReport> {
    kbarv_seeded(dists, mu, d0, &[])
}

/// As [`kbarv`], with extra starting queries (values in `[0, 1]`).
pub fn kbarv_seeded(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution, seeds: &[Vec<f64>]) -> Result<NormReport> {
    check_measure(dists, mu)?;
    deltas(dists, d0)?;
    let mut candidates = vertex_candidates(dists, d0);
    for s in seeds {
        if s.len() != d0.len() || s.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(SqError::InvalidArgument("seed queries must be [0,1]-valued on the domain".into()));
        }
        candidates.push(s.clone());
    }
    let w = mu.weights();
    let objective = |phi: &[f64]| average_root_discrimination(dists, w, d0, phi);
    let (best, _) = argmax_par(candidates.len() as u64, |i| objective(&candidates[i as usize]));
    let (phi, value) = grid_refine(&candidates[best as usize], objective);
    Ok(NormReport::new(value, Exactness::LowerBound, Certificate { query: Some(phi), ..Default::default() }))
}

fn restrict(dists: &[FiniteDistribution], mu: &Measure) -> (Vec<usize>, Vec<FiniteDistribution>) {
    let support = mu.support();
    let sub = support.iter().map(|&i| dists[i].clone()).collect();
    (support, sub)
}

/// Exact `κ1-frac(μ, D0, τ)`: the largest `μ`-mass of distributions that
/// one query `φ : X → [−1,1]` separates from `D0` by more than `τ`.
pub fn kappa1_frac(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution, tau: f64) -> Result<NormReport> {
    frac_from_family(dists, mu, d0, tau, Kappa::K1)
}

/// Lower bound on the square-root-scale covered fraction, from binary
/// query vertices.
pub fn kappav_frac(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution, tau: f64) -> Result<NormReport> {
    frac_from_family(dists, mu, d0, tau, Kappa::Kv)
}

fn frac_from_family(
    dists: &[FiniteDistribution],
    mu: &Measure,
    d0: &FiniteDistribution,
    tau: f64,
    kappa: Kappa,
) -> Result<NormReport> {
    check_measure(dists, mu)?;
    let (support, sub) = restrict(dists, mu);
    if support.len() > SUBSET_LIMIT {
        return Err(SqError::GuardExceeded { guard: "covered-fraction subsets", actual: support.len(), limit: SUBSET_LIMIT });
    }
    let family = achievable_subsets(&sub, d0, tau, kappa)?;
    let exactness = if family.exact { Exactness::Exact } else { Exactness::LowerBound };
    let mut best = (0.0, None::<usize>);
    for (k, set) in family.sets.iter().enumerate() {
        let mass: f64 = set.members.iter().map(|&j| mu.weights()[support[j]]).sum();
        if mass > best.0 {
            best = (mass, Some(k));
        }
    }
    let certificate = match best.1 {
        Some(k) => Certificate {
            query: Some(family.sets[k].witness.clone()),
            subset: Some(family.sets[k].members.iter().map(|&j| support[j]).collect()),
            signs: None,
        },
        None => Certificate::default(),
    };
    Ok(NormReport::new(best.0, exactness, certificate))
}

/// Lower bound on the largest `μ`-mass of `D' ⊆ D` with
/// `κ̄v(μ|D', D0) > τ`: for each candidate query the distributions are
/// taken in decreasing order of discrimination, keeping the largest prefix
/// whose conditional average still exceeds `τ`.
pub fn kbarv_frac(dists: &[FiniteDistribution], mu: &Measure, d0: &FiniteDistribution, tau: f64) -> Result<NormReport> {
    check_measure(dists, mu)?;
    deltas(dists, d0)?;
    let threshold = tau + ACHIEVE_SLACK;
    let w = mu.weights();
    let support = mu.support();
    let prefix_mass = |phi: &[f64]| -> (f64, Vec<usize>) {
        let mut scored: Vec<(usize, f64)> =
            support.iter().map(|&i| (i, discrimination(Kappa::Kv, dists[i].weights(), d0.weights(), phi))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let (mut mass, mut total, mut best) = (0.0, 0.0, (0.0, 0usize));
        for (n, (i, g)) in scored.iter().enumerate() {
            mass += w[*i];
            total += w[*i] * g;
            if total >= threshold * mass {
                best = (mass, n + 1);
            }
        }
        (best.0, scored[..best.1].iter().map(|(i, _)| *i).collect())
    };
    let candidates = vertex_candidates(dists, d0);
    let (best, _) = argmax_par(candidates.len() as u64, |i| prefix_mass(&candidates[i as usize]).0);
    let (phi, _) = grid_refine(&candidates[best as usize], |p| prefix_mass(p).0);
    let (value, mut subset) = prefix_mass(&phi);
    subset.sort_unstable();
    Ok(NormReport::new(value, Exactness::LowerBound, Certificate { query: Some(phi), subset: Some(subset), signs: None }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::FiniteDomain;

    fn dist(w: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(FiniteDomain::indexed(w.len()).unwrap(), w.to_vec()).unwrap()
    }

    fn with_domain(d0: &FiniteDistribution, w: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(d0.domain().clone(), w.to_vec()).unwrap()
    }

    #[test]
    fn kbar1_examples() {
        let d0 = dist(&[0.5, 0.5]);
        let d = with_domain(&d0, &[0.75, 0.25]);
        let r = kbar1(&[d.clone()], &Measure::point(1, 0).unwrap(), &d0).unwrap();
        assert_eq!(r.value, 0.5);
        let m = with_domain(&d0, &[0.25, 0.75]);
        let r = kbar1(&[d, m], &Measure::uniform(2).unwrap(), &d0).unwrap();
        assert_eq!(r.value, 0.5);
        let q = r.certificate.query.unwrap();
        assert_eq!(q[0], -q[1]);
        assert_eq!(kbar1(&[d0.clone()], &Measure::point(1, 0).unwrap(), &d0).unwrap().value, 0.0);
    }

    #[test]
    fn kbar2_single_distribution_is_chi_root() {
        let d0 = dist(&[0.5, 0.5]);
        let d = with_domain(&d0, &[0.75, 0.25]);
        let mu = Measure::point(1, 0).unwrap();
        assert!((kbar2(&[d.clone()], &mu, &d0).unwrap().value - 0.5).abs() < 1e-15);
        assert!((kbar2_spectral(&[d.clone()], &mu, &d0).unwrap().value - 0.5).abs() < 1e-12);
        assert!((rho(&[d], &d0).unwrap().value - 0.25).abs() < 1e-15);
        assert_eq!(kbar2(&[d0.clone()], &mu, &d0).unwrap().value, 0.0);
        assert_eq!(kbar2_spectral(&[d0.clone()], &mu, &d0).unwrap().value, 0.0);
    }

    #[test]
    fn kbarv_below_kbar2() {
        let d0 = dist(&[0.5, 0.5]);
        let d = with_domain(&d0, &[0.75, 0.25]);
        let mu = Measure::point(1, 0).unwrap();
        let v = kbarv(&[d.clone()], &mu, &d0).unwrap();
        // Binary vertex {0}: √0.75 − √0.5.
        let vertex = 0.75f64.sqrt() - 0.5f64.sqrt();
        assert!(v.value >= vertex - 1e-15);
        assert!(v.value <= 0.5);
        assert!(v.value >= kbar1(&[d], &mu, &d0).unwrap().value / 4.0);
    }

    #[test]
    fn kappa1_frac_examples() {
        let d0 = dist(&[0.5, 0.5]);
        let d = with_domain(&d0, &[0.75, 0.25]);
        let mu = Measure::point(1, 0).unwrap();
        assert_eq!(kappa1_frac(&[d.clone()], &mu, &d0, 0.2).unwrap().value, 1.0);
        assert_eq!(kappa1_frac(&[d.clone()], &mu, &d0, 0.6).unwrap().value, 0.0);
        let both = [d, d0.clone()];
        let r = kappa1_frac(&both, &Measure::uniform(2).unwrap(), &d0, 0.0).unwrap();
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn kbarv_frac_takes_discriminated_prefix() {
        let d0 = dist(&[0.5, 0.5]);
        let far = with_domain(&d0, &[0.9, 0.1]);
        let near = with_domain(&d0, &[0.52, 0.48]);
        let mu = Measure::uniform(2).unwrap();
        let r = kbarv_frac(&[far, near], &mu, &d0, 0.1).unwrap();
        assert!(r.value >= 0.5);
    }
}

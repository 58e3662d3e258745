//! Margin LPs, families of jointly distinguishable distributions, and
//! (fractional) set covers over those families.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lp::{lp_solve, LinearProgram, Relation};
use crate::distributions::{dot, same_domain, FiniteDistribution};
use crate::error::{Result, SqError};

/// Strict `> τ` conditions are evaluated as `≥ τ + ACHIEVE_SLACK`.
pub const ACHIEVE_SLACK: f64 = 1e-9;

/// Default bound on the number of distributions for exact subset enumeration.
pub const SUBSET_LIMIT: usize = 20;

/// Which discrimination a cover condition uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kappa {
    /// `|D[φ] − D0[φ]| > τ` with `φ : X → [−1, 1]`.
    K1,
    /// `|√D[φ] − √D0[φ]| > τ` with `φ : X → [0, 1]`.
    Kv,
}

pub(crate) fn deltas(dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Result<Vec<Vec<f64>>> {
    dists
        .iter()
        .map(|d| {
            if !same_domain(d.domain(), d0.domain()) {
                return Err(SqError::DomainMismatch("class and reference live on different domains".into()));
            }
            Ok(d.weights().iter().zip(d0.weights()).map(|(a, b)| a - b).collect())
        })
        .collect()
}

/// Optimal margin and the query attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    /// `+∞` for an empty subset.
    pub value: f64,
    pub witness: Vec<f64>,
}

/// `max t` subject to `s_D (D[φ] − D0[φ]) ≥ t` for `D ∈ subset`, `φ ∈ [−1, 1]^X`.
pub fn max_margin(
    signs: &[i8],
    subset: &[usize],
    dists: &[FiniteDistribution],
    d0: &FiniteDistribution,
) -> Result<Margin> {
    if signs.len() != subset.len() {
        return Err(SqError::InvalidArgument("one sign per subset member required".into()));
    }
    if subset.is_empty() {
        return Ok(Margin { value: f64::INFINITY, witness: vec![0.0; d0.len()] });
    }
    let all = deltas(dists, d0)?;
    let rows: Vec<&[f64]> = subset
        .iter()
        .map(|&i| all.get(i).map(Vec::as_slice).ok_or_else(|| SqError::InvalidArgument(format!("no distribution {i}"))))
        .collect::<Result<_>>()?;
    margin_lp(&rows, signs)
}

/// Smallest signed correlation of `phi` over the rows.
pub(crate) fn evaluate_margin(rows: &[&[f64]], signs: &[i8], phi: &[f64]) -> f64 {
    rows.iter()
        .zip(signs)
        .map(|(r, &s)| f64::from(s) * dot(r, phi))
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn margin_lp(rows: &[&[f64]], signs: &[i8]) -> Result<Margin> {
    let nx = rows[0].len();
    if rows.len() == 1 {
        // Closed form: the sign vector of the difference attains its L1 norm.
        let s = f64::from(signs[0]);
        let witness: Vec<f64> = rows[0].iter().map(|v| if s * v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let value = evaluate_margin(rows, signs, &witness);
        return Ok(Margin { value, witness });
    }
    let mut obj = vec![0.0; nx + 1];
    obj[nx] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    for x in 0..nx {
        lp.bound(x, -1.0, 1.0);
    }
    lp.bound(nx, 0.0, 2.0);
    for (r, &s) in rows.iter().zip(signs) {
        let mut coeffs: Vec<f64> = r.iter().map(|v| -f64::from(s) * v).collect();
        coeffs.push(1.0);
        lp.constrain(coeffs, Relation::Le, 0.0);
    }
    let sol = lp_solve(&lp)?;
    let witness: Vec<f64> = sol.x[..nx].iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let value = evaluate_margin(rows, signs, &witness).max(0.0);
    Ok(Margin { value, witness })
}

/// A subset of the ground set together with a query that covers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSet {
    pub members: Vec<usize>,
    pub witness: Vec<f64>,
}

/// Maximal coverable subsets of `0..ground` at tolerance `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverFamily {
    pub ground: usize,
    pub tau: f64,
    pub kappa: Kappa,
    pub sets: Vec<CoverSet>,
    /// `false` when the family may miss coverable subsets.
    pub exact: bool,
}

impl CoverFamily {
    pub fn masks(&self) -> Vec<u64> {
        self.sets.iter().map(|s| mask_of(&s.members)).collect()
    }

    /// Ground elements contained in no listed subset.
    pub fn uncovered(&self) -> Vec<usize> {
        let all = self.masks().iter().fold(0u64, |a, m| a | m);
        (0..self.ground).filter(|&i| all & (1 << i) == 0).collect()
    }

    /// `max_S μ(S)` over the listed subsets.
    pub fn max_mass(&self, mu: &[f64]) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (k, s) in self.sets.iter().enumerate() {
            let m: f64 = s.members.iter().map(|&i| mu[i]).sum();
            if m > best.0 {
                best = (m, Some(k));
            }
        }
        best
    }

    /// Re-checks every witness against the distributions.
    pub fn verify(&self, dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Result<()> {
        for s in &self.sets {
            for &i in &s.members {
                let gap = discrimination(self.kappa, dists[i].weights(), d0.weights(), &s.witness);
                if gap < self.tau + ACHIEVE_SLACK * 0.5 {
                    return Err(SqError::VerificationFailed(format!(
                        "witness covers distribution {i} only at {gap}, tolerance {}",
                        self.tau
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn mask_of(members: &[usize]) -> u64 {
    members.iter().fold(0u64, |m, &i| m | (1 << i))
}

pub(crate) fn members_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask & (1 << i) != 0).collect()
}

/// `|D[φ] − D0[φ]|` or `|√D[φ] − √D0[φ]|`.
pub fn discrimination(kappa: Kappa, d: &[f64], d0: &[f64], phi: &[f64]) -> f64 {
    match kappa {
        Kappa::K1 => (dot(d, phi) - dot(d0, phi)).abs(),
        Kappa::Kv => (dot(d, phi).max(0.0).sqrt() - dot(d0, phi).max(0.0).sqrt()).abs(),
    }
}

/// Maximal subsets of `dists` that a single query separates from `d0` at
/// tolerance `tau` (exact for `K1`, from binary query vertices for `Kv`).
pub fn achievable_subsets(
    dists: &[FiniteDistribution],
    d0: &FiniteDistribution,
    tau: f64,
    kappa: Kappa,
) -> Result<CoverFamily> {
    achievable_subsets_limited(dists, d0, tau, kappa, SUBSET_LIMIT)
}

/// As [`achievable_subsets`] with a caller-chosen size guard (at most 64).
pub fn achievable_subsets_limited(
    dists: &[FiniteDistribution],
    d0: &FiniteDistribution,
    tau: f64,
    kappa: Kappa,
    limit: usize,
) -> Result<CoverFamily> {
    let limit = limit.min(64);
    if dists.len() > limit {
        return Err(SqError::GuardExceeded { guard: "achievable-subsets distributions", actual: dists.len(), limit });
    }
    let rows = deltas(dists, d0)?;
    match kappa {
        Kappa::K1 => signed_enumeration(&rows, tau),
        Kappa::Kv => vertex_family(dists, d0, tau),
    }
}

type SignedSet = (u64, u64);

fn canonical(mask: u64, neg: u64) -> SignedSet {
    let low = mask & mask.wrapping_neg();
    let neg = neg & mask;
    if neg & low != 0 {
        (mask, neg ^ mask)
    } else {
        (mask, neg)
    }
}

fn signed_rows<'a>(rows: &'a [Vec<f64>], (mask, neg): SignedSet) -> (Vec<&'a [f64]>, Vec<i8>) {
    let members = members_of(mask);
    let r = members.iter().map(|&i| rows[i].as_slice()).collect();
    let s = members.iter().map(|&i| if neg & (1 << i) != 0 { -1 } else { 1 }).collect();
    (r, s)
}

fn signed_enumeration(rows: &[Vec<f64>], tau: f64) -> Result<CoverFamily> {
    let n = rows.len();
    let threshold = tau + ACHIEVE_SLACK;
    let mut unsigned: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut level: Vec<(SignedSet, Vec<f64>)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let m = margin_lp(&[r.as_slice()], &[1])?;
        if m.value >= threshold {
            level.push(((1 << i, 0), m.witness.clone()));
            unsigned.insert(1 << i, m.witness);
        }
    }
    while !level.is_empty() {
        let achieved: HashSet<SignedSet> = level.iter().map(|(k, _)| *k).collect();
        let mut candidates: Vec<(SignedSet, &Vec<f64>)> = Vec::new();
        for ((mask, neg), witness) in &level {
            let top = 63 - mask.leading_zeros() as usize;
            for j in top + 1..n {
                for s in 0..2u64 {
                    let cand = (mask | 1 << j, neg | s << j);
                    let closed = members_of(*mask).iter().all(|&i| {
                        let sub = canonical(cand.0 & !(1 << i), cand.1 & !(1 << i));
                        achieved.contains(&sub)
                    });
                    if closed {
                        candidates.push((cand, witness));
                    }
                }
            }
        }
        let results: Vec<Option<(SignedSet, Vec<f64>)>> = candidates
            .par_iter()
            .map(|&(cand, parent_witness)| {
                let (r, s) = signed_rows(rows, cand);
                if evaluate_margin(&r, &s, parent_witness) >= threshold {
                    return Ok(Some((cand, parent_witness.clone())));
                }
                let m = margin_lp(&r, &s)?;
                Ok((m.value >= threshold).then_some((cand, m.witness)))
            })
            .collect::<Result<_>>()?;
        level = results.into_iter().flatten().collect();
        for ((mask, _), w) in &level {
            unsigned.entry(*mask).or_insert_with(|| w.clone());
        }
    }
    Ok(maximal_family(n, tau, Kappa::K1, unsigned, true))
}

fn maximal_family(n: usize, tau: f64, kappa: Kappa, sets: HashMap<u64, Vec<f64>>, exact: bool) -> CoverFamily {
    // The exact K1 family is closed under taking subsets, so a set is maximal
    // iff no one-element extension is present.
    let is_maximal = |m: u64| {
        if exact {
            !(0..n).any(|j| m & (1 << j) == 0 && sets.contains_key(&(m | 1 << j)))
        } else {
            !sets.keys().any(|&o| o != m && o & m == m)
        }
    };
    let mut maximal: Vec<(u64, Vec<f64>)> =
        sets.iter().filter(|(m, _)| is_maximal(**m)).map(|(m, w)| (*m, w.clone())).collect();
    maximal.sort_by_key(|(m, _)| (std::cmp::Reverse(m.count_ones()), *m));
    CoverFamily {
        ground: n,
        tau,
        kappa,
        sets: maximal.into_iter().map(|(m, w)| CoverSet { members: members_of(m), witness: w }).collect(),
        exact,
    }
}

fn vertex_family(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64) -> Result<CoverFamily> {
    let nx = d0.len();
    let threshold = tau + ACHIEVE_SLACK;
    let candidates: Vec<Vec<f64>> = if nx <= 20 {
        (1u64..(1 << nx)).map(|bits| (0..nx).map(|x| ((bits >> x) & 1) as f64).collect()).collect()
    } else {
        binary_seeds(dists, d0)
    };
    let coverage: Vec<(u64, Vec<f64>)> = candidates
        .into_par_iter()
        .filter_map(|phi| {
            let mask = dists.iter().enumerate().fold(0u64, |m, (i, d)| {
                if discrimination(Kappa::Kv, d.weights(), d0.weights(), &phi) >= threshold {
                    m | 1 << i
                } else {
                    m
                }
            });
            (mask != 0).then_some((mask, phi))
        })
        .collect();
    let mut sets: HashMap<u64, Vec<f64>> = HashMap::new();
    for (m, phi) in coverage {
        sets.entry(m).or_insert(phi);
    }
    Ok(maximal_family(dists.len(), tau, Kappa::Kv, sets, false))
}

/// Binary queries `1[D > D0]`, `1[D < D0]` for each `D` in the class.
pub(crate) fn binary_seeds(dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for d in dists {
        let up: Vec<f64> = d.weights().iter().zip(d0.weights()).map(|(a, b)| f64::from(u8::from(a > b))).collect();
        let down: Vec<f64> = d.weights().iter().zip(d0.weights()).map(|(a, b)| f64::from(u8::from(a < b))).collect();
        out.push(up);
        out.push(down);
    }
    out
}

/// Result of the covering LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalCover {
    /// Smallest `d` with `Σ_{S∋D} Q(S) ≥ 1/d` for every ground element;
    /// `+∞` when some element is in no subset.
    pub value: f64,
    /// Probability weights over `family.sets`.
    pub weights: Vec<f64>,
    pub uncovered: Option<usize>,
}

/// `min Σ q_S` subject to `Σ_{S∋D} q_S ≥ 1`; `Q = q / Σ q`.
pub fn fractional_cover(family: &CoverFamily) -> Result<FractionalCover> {
    let k = family.sets.len();
    if family.ground == 0 {
        return Ok(FractionalCover { value: 0.0, weights: vec![], uncovered: None });
    }
    if let Some(&i) = family.uncovered().first() {
        return Ok(FractionalCover { value: f64::INFINITY, weights: vec![0.0; k], uncovered: Some(i) });
    }
    let masks = family.masks();
    let mut lp = LinearProgram::maximize(vec![-1.0; k]);
    for d in 0..family.ground {
        let row = masks.iter().map(|m| if m & (1 << d) != 0 { 1.0 } else { 0.0 }).collect();
        lp.constrain(row, Relation::Ge, 1.0);
    }
    let sol = lp_solve(&lp)?;
    let value = -sol.objective;
    let weights = sol.x.iter().map(|q| q.max(0.0) / value).collect();
    Ok(FractionalCover { value, weights, uncovered: None })
}

/// Dual of the covering LP: `max Σ y_D` subject to `Σ_{D∈S} y_D ≤ 1`.
/// Returns the value and the normalized measure `μ = y / Σ y`.
pub fn fractional_packing(family: &CoverFamily) -> Result<(f64, Vec<f64>)> {
    let n = family.ground;
    if n == 0 {
        return Ok((0.0, vec![]));
    }
    if let Some(&i) = family.uncovered().first() {
        let mut mu = vec![0.0; n];
        mu[i] = 1.0;
        return Ok((f64::INFINITY, mu));
    }
    let mut lp = LinearProgram::maximize(vec![1.0; n]);
    for s in &family.sets {
        let mut row = vec![0.0; n];
        for &i in &s.members {
            row[i] = 1.0;
        }
        lp.constrain(row, Relation::Le, 1.0);
    }
    let sol = lp_solve(&lp)?;
    let value = sol.objective;
    Ok((value, sol.x.iter().map(|y| y.max(0.0) / value).collect()))
}

/// Repeated max-coverage; returns indices into `family.sets`.
pub fn greedy_cover(family: &CoverFamily) -> Result<Vec<usize>> {
    if let Some(&index) = family.uncovered().first() {
        return Err(SqError::Uncoverable { index, tau: family.tau });
    }
    let masks = family.masks();
    let full: u64 = if family.ground == 64 { u64::MAX } else { (1u64 << family.ground) - 1 };
    let mut covered = 0u64;
    let mut chosen = Vec::new();
    while covered != full {
        let (k, _) = masks
            .iter()
            .enumerate()
            .map(|(k, m)| (k, (m & !covered).count_ones()))
            .max_by_key(|&(k, c)| (c, std::cmp::Reverse(k)))
            .expect("non-empty family");
        covered |= masks[k];
        chosen.push(k);
    }
    Ok(chosen)
}

/// Minimum set cover by depth-first branching on the lowest uncovered element.
pub fn exact_min_cover(family: &CoverFamily) -> Result<Vec<usize>> {
    if family.ground > SUBSET_LIMIT {
        return Err(SqError::GuardExceeded { guard: "exact cover ground set", actual: family.ground, limit: SUBSET_LIMIT });
    }
    let mut best = greedy_cover(family)?;
    let masks = family.masks();
    let full: u64 = (1u64 << family.ground) - 1;
    let mut path = Vec::new();
    search_cover(&masks, full, 0, &mut path, &mut best);
    Ok(best)
}

fn search_cover(masks: &[u64], full: u64, covered: u64, path: &mut Vec<usize>, best: &mut Vec<usize>) {
    if covered == full {
        if path.len() < best.len() {
            *best = path.clone();
        }
        return;
    }
    if path.len() + 1 >= best.len() {
        return;
    }
    let e = (!covered & full).trailing_zeros();
    let mut options: Vec<usize> = (0..masks.len()).filter(|&k| masks[k] & (1 << e) != 0).collect();
    options.sort_by_key(|&k| std::cmp::Reverse((masks[k] & !covered).count_ones()));
    for k in options {
        path.push(k);
        search_cover(masks, full, covered | masks[k], path, best);
        path.pop();
    }
}

/// Whether a distribution can be separated from `d0` by any single query.
pub fn best_single_discrimination(kappa: Kappa, d: &[f64], d0: &[f64]) -> (f64, Vec<f64>) {
    match kappa {
        Kappa::K1 => {
            let w: Vec<f64> = d.iter().zip(d0).map(|(a, b)| if a >= b { 1.0 } else { -1.0 }).collect();
            (discrimination(kappa, d, d0, &w), w)
        }
        Kappa::Kv => {
            let up: Vec<f64> = d.iter().zip(d0).map(|(a, b)| f64::from(u8::from(a > b))).collect();
            let down: Vec<f64> = d.iter().zip(d0).map(|(a, b)| f64::from(u8::from(a < b))).collect();
            let (gu, gd) = (discrimination(kappa, d, d0, &up), discrimination(kappa, d, d0, &down));
            if gu >= gd {
                (gu, up)
            } else {
                (gd, down)
            }
        }
    }
}

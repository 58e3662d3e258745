#![allow(dead_code)]

use rand::Rng;
use sqlab::distributions::{FiniteDistribution, FiniteDomain, Measure};
use sqlab::oracles::{seeded_rng, SqRng};

/// A random class on `nx` points around a random full-support reference.
/// `spread` scales the multiplicative perturbation of each member.
pub fn random_instance(rng: &mut SqRng, nx: usize, k: usize, spread: f64) -> (Vec<FiniteDistribution>, FiniteDistribution) {
    let domain = FiniteDomain::indexed(nx).unwrap();
    let base: Vec<f64> = (0..nx).map(|_| 0.2 + rng.random::<f64>()).collect();
    let d0 = FiniteDistribution::normalized(domain.clone(), base.clone()).unwrap();
    let dists = (0..k)
        .map(|_| {
            let w = base.iter().map(|b| b * (spread * (2.0 * rng.random::<f64>() - 1.0)).exp()).collect();
            FiniteDistribution::normalized(domain.clone(), w).unwrap()
        })
        .collect();
    (dists, d0)
}

pub fn random_measure(rng: &mut SqRng, k: usize) -> Measure {
    Measure::normalized((0..k).map(|_| 0.05 + rng.random::<f64>()).collect()).unwrap()
}

/// Sized instance from a proptest seed.
pub fn instance_from_seed(seed: u64) -> (Vec<FiniteDistribution>, FiniteDistribution, Measure) {
    let mut rng = seeded_rng(seed);
    let nx = rng.random_range(2..=6);
    let k = rng.random_range(1..=6);
    let spread = rng.random_range(0.2..1.5);
    let (dists, d0) = random_instance(&mut rng, nx, k, spread);
    let mu = random_measure(&mut rng, k);
    (dists, d0, mu)
}

pub fn deltas(dists: &[FiniteDistribution], d0: &FiniteDistribution) -> Vec<Vec<f64>> {
    dists.iter().map(|d| d.weights().iter().zip(d0.weights()).map(|(a, b)| a - b).collect()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Every `±1` vector of length `n`.
pub fn sign_vectors(n: usize) -> impl Iterator<Item = Vec<f64>> {
    (0u64..1 << n).map(move |b| (0..n).map(|i| if b >> i & 1 == 1 { 1.0 } else { -1.0 }).collect())
}

/// `max_φ∈{±1}^X Σ μ |⟨φ, D − D0⟩|` by direct vertex enumeration.
pub fn kbar1_by_vertices(dists: &[FiniteDistribution], mu: &[f64], d0: &FiniteDistribution) -> f64 {
    let rows = deltas(dists, d0);
    sign_vectors(d0.len())
        .map(|phi| rows.iter().zip(mu).map(|(r, m)| m * dot(r, &phi).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max_{‖φ‖_{D0}=1} Σ μ |⟨φ, D − D0⟩|` through the dual norm: for a fixed
/// sign pattern `s` the best `φ` gives `√Σ_x g(x)²/D0(x)` with
/// `g = Σ μ s (D − D0)`.
pub fn kbar2_by_dual_norm(dists: &[FiniteDistribution], mu: &[f64], d0: &FiniteDistribution) -> f64 {
    let rows = deltas(dists, d0);
    sign_vectors(rows.len())
        .map(|s| {
            let g: Vec<f64> = (0..d0.len()).map(|x| rows.iter().zip(mu).zip(&s).map(|((r, m), si)| m * si * r[x]).sum()).collect();
            g.iter().zip(d0.weights()).map(|(v, p)| v * v / p).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

/// `Σ μ μ' |Σ_x (D−D0)(D'−D0)/D0|`.
pub fn rho_by_sum(dists: &[FiniteDistribution], mu: &[f64], d0: &FiniteDistribution) -> f64 {
    let rows = deltas(dists, d0);
    let mut total = 0.0;
    for (a, ma) in rows.iter().zip(mu) {
        for (b, mb) in rows.iter().zip(mu) {
            let c: f64 = (0..d0.len()).map(|x| a[x] * b[x] / d0.weights()[x]).sum();
            total += ma * mb * c.abs();
        }
    }
    total
}

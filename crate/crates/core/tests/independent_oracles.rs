//! Library results against oracles written from scratch here: brute-force
//! LP vertices, a dense symmetric eigensolver, direct vertex and sign
//! enumeration, and closed-form expectations.

mod common;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use common::{kbar1_by_vertices, kbar2_by_dual_norm, random_instance, random_measure, rho_by_sum};
use sqlab::distributions::{expectation, pac_lift, FiniteDistribution, FiniteDomain, Measure, QueryFn, RangeTag};
use sqlab::games::{lp_solve, max_margin, LinearProgram, Relation};
use sqlab::norms::{correlation_matrix, kbar1, kbar2, kbar2_spectral, rho_weighted};
use sqlab::oracles::seeded_rng;
use sqlab::problems::{
    all_lines, all_ones_query, hypercube_domain, line_base_domain, line_domain, BicliqueInstance, Marginal,
};

/// Best objective over all basic feasible points of `A x ≤ b, x ≥ 0`.
fn lp_by_vertices(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let n = c.len();
    // Rows 0..m are A, rows m..m+n are −x_j ≤ 0.
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let total = rows.len();
    let mut best = f64::NEG_INFINITY;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let m = DMatrix::from_fn(n, n, |i, j| rows[pick[i]].0[j]);
        let rhs = DVector::from_fn(n, |i, _| rows[pick[i]].1);
        if let Some(x) = m.lu().solve(&rhs) {
            let feasible = rows.iter().all(|(r, bi)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
            if feasible {
                best = best.max(c.iter().zip(x.iter()).map(|(p, q)| p * q).sum());
            }
        }
        // Next n-combination of 0..total in lexicographic order.
        let mut i = n;
        while i > 0 && pick[i - 1] == total - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        pick[i - 1] += 1;
        for j in i..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

#[test]
fn dense_lp_matches_vertex_enumeration() {
    let mut rng = seeded_rng(2024);
    for _ in 0..4 {
        let n = 10;
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Half the rows are strictly positive, which keeps the problem bounded.
        let a: Vec<Vec<f64>> = (0..10)
            .map(|r| (0..n).map(|_| if r < 5 { rng.random_range(-0.3..1.0) } else { rng.random_range(0.05..1.0) }).collect())
            .collect();
        let b: Vec<f64> = (0..10).map(|_| rng.random_range(0.2..2.0)).collect();
        let mut lp = LinearProgram::maximize(c.clone());
        for (row, bi) in a.iter().zip(&b) {
            lp.constrain(row.clone(), Relation::Le, *bi);
        }
        let sol = lp_solve(&lp).unwrap();
        let brute = lp_by_vertices(&c, &a, &b);
        assert!((sol.objective - brute).abs() <= 1e-6, "simplex {} vs vertices {brute}", sol.objective);
    }
}

#[test]
fn spectral_norm_matches_dense_eigensolver() {
    let mut rng = seeded_rng(7);
    for _ in 0..25 {
        let nx = rng.random_range(3..=8);
        let k = rng.random_range(1..=7);
        let (dists, d0) = random_instance(&mut rng, nx, k, 0.9);
        let mu = random_measure(&mut rng, k);
        let g = correlation_matrix(&dists, &d0).unwrap();
        let w = mu.weights();
        let h = DMatrix::from_fn(k, k, |i, j| w[i].sqrt() * g[i][j] * w[j].sqrt());
        let lambda = SymmetricEigen::new(h).eigenvalues.max();
        let spectral = kbar2_spectral(&dists, &mu, &d0).unwrap().value;
        assert!((spectral - lambda.max(0.0).sqrt()).abs() <= 1e-7, "{spectral} vs {}", lambda.sqrt());
    }
}

#[test]
fn exact_norms_match_enumeration() {
    let mut rng = seeded_rng(11);
    for _ in 0..40 {
        let nx = rng.random_range(2..=7);
        let k = rng.random_range(1..=6);
        let (dists, d0) = random_instance(&mut rng, nx, k, 1.0);
        let mu = random_measure(&mut rng, k);
        let k1 = kbar1(&dists, &mu, &d0).unwrap().value;
        let k2 = kbar2(&dists, &mu, &d0).unwrap().value;
        let rho = rho_weighted(&dists, &mu, &d0).unwrap().value;
        assert!((k1 - kbar1_by_vertices(&dists, mu.weights(), &d0)).abs() <= 1e-10);
        assert!((k2 - kbar2_by_dual_norm(&dists, mu.weights(), &d0)).abs() <= 1e-9);
        assert!((rho - rho_by_sum(&dists, mu.weights(), &d0)).abs() <= 1e-10);
    }
}

#[test]
fn singleton_margin_is_l1_distance_on_random_instances() {
    let mut rng = seeded_rng(5);
    for _ in 0..30 {
        let (dists, d0) = random_instance(&mut rng, 5, 1, 1.0);
        let l1 = dists[0].l1_distance(&d0).unwrap();
        let m = max_margin(&[1], &[0], &dists, &d0).unwrap();
        assert!((m.value - l1).abs() <= 1e-9);
    }
}

#[test]
fn biclique_closed_form_matches_enumeration() {
    let mut rng = seeded_rng(3);
    for n in [3usize, 5, 8] {
        let dom = hypercube_domain(n).unwrap();
        for _ in 0..5 {
            let k = rng.random_range(1..=n);
            let mut plant: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                plant.swap(i, rng.random_range(0..=i));
            }
            plant.truncate(k);
            plant.sort_unstable();
            let b = BicliqueInstance::new(n, plant.clone()).unwrap();
            let d = b.distribution(&dom).unwrap();
            let t_len = rng.random_range(1..=n);
            let t: Vec<usize> = (0..t_len).collect();
            let q = all_ones_query(&dom, n, &t).unwrap();
            assert!((expectation(&d, &q).unwrap() - b.conjunction(&t)).abs() <= 1e-12);
            let q = all_ones_query(&dom, n, &plant).unwrap();
            let kn = k as f64 / n as f64;
            assert!((expectation(&d, &q).unwrap() - (kn + (1.0 - kn) * 0.5f64.powi(k as i32))).abs() <= 1e-12);
        }
    }
}

#[test]
fn line_densities_match_the_labeled_lift() {
    for p in [3u64, 5, 7] {
        let base = line_base_domain(p).unwrap();
        let labeled = line_domain(p).unwrap();
        let pf = p as f64;
        for line in all_lines(p, Marginal::Skewed).unwrap() {
            let d = line.distribution(&labeled).unwrap();
            let marginal = line.marginal_distribution(&base).unwrap();
            let lifted = pac_lift(&marginal, &line.labels(), &labeled).unwrap();
            for (a, b) in d.weights().iter().zip(lifted.weights()) {
                assert!((a - b).abs() <= 1e-15);
            }
            // Positive mass on the line: p points of weight 1/(2p) + 1/(2p²).
            let mut on = vec![0.0; labeled.len()];
            for z in 0..p * p {
                if line.on_line(z / p, z % p) {
                    on[FiniteDomain::labeled_index(z as usize, 1)] = 1.0;
                }
            }
            let q = QueryFn::new(labeled.clone(), on, RangeTag::Unit).unwrap();
            assert!((expectation(&d, &q).unwrap() - (0.5 + 0.5 / pf)).abs() <= 1e-12);
        }
    }
}

#[test]
fn point_measure_norms_have_closed_forms() {
    let dom = FiniteDomain::indexed(2).unwrap();
    let d0 = FiniteDistribution::uniform(dom.clone());
    let d = FiniteDistribution::new(dom, vec![0.75, 0.25]).unwrap();
    let mu = Measure::point(1, 0).unwrap();
    assert!((kbar1(&[d.clone()], &mu, &d0).unwrap().value - 0.5).abs() <= 1e-15);
    assert!((kbar2(&[d.clone()], &mu, &d0).unwrap().value - 0.5).abs() <= 1e-15);
    assert!((kbar2_spectral(&[d], &mu, &d0).unwrap().value - 0.5).abs() <= 1e-9);
}

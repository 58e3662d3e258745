mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{instance_from_seed, random_instance};
use sqlab::dimension::{det_cover, rsd_decision, sd_decision, verify_cover_certificate, CoverMode};
use sqlab::distributions::{expectation, kl_radius_upper, likelihood_hat, FiniteDistribution, FiniteDomain, QueryFn, RangeTag};
use sqlab::games::cover::{achievable_subsets, discrimination, fractional_cover, greedy_cover, Kappa};
use sqlab::games::game::{zero_sum, GameMatrix};
use sqlab::games::lp::{lp_solve, LinearProgram, Relation};
use sqlab::norms::{average_discrimination, kappa1_frac, kbar1, kbar2};
use sqlab::oracles::seeded_rng;
use sqlab::solvers::MwState;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

fn coverable(dists: &[FiniteDistribution], d0: &FiniteDistribution, tau: f64) -> bool {
    achievable_subsets(dists, d0, tau, Kappa::K1).unwrap().uncovered().is_empty()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn expectation_is_linear(seed in any::<u64>(), a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let (dists, _, _) = instance_from_seed(seed);
        let d = &dists[0];
        let mut rng = seeded_rng(seed ^ 1);
        let n = d.len();
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let h: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let q = |v: Vec<f64>| QueryFn::new(d.domain().clone(), v, RangeTag::Signed).unwrap();
        let lhs = expectation(d, &q(h)).unwrap();
        let rhs = a * expectation(d, &q(f)).unwrap() + b * expectation(d, &q(g)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10);
    }

    #[test]
    fn likelihood_ratio_has_zero_reference_mean(seed in any::<u64>()) {
        let (dists, d0, _) = instance_from_seed(seed);
        for d in &dists {
            let hat = likelihood_hat(d, &d0).unwrap();
            let mean: f64 = hat.iter().zip(d0.weights()).map(|(h, p)| h * p).sum();
            prop_assert!(mean.abs() <= 1e-12);
        }
    }

    #[test]
    fn kl_radius_at_most_log_class_size(seed in any::<u64>()) {
        let (dists, _, _) = instance_from_seed(seed);
        let (r, _) = kl_radius_upper(&dists).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!(r <= (dists.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn covered_fraction_shrinks_with_tau(seed in any::<u64>(), t1 in 0.01f64..0.8, t2 in 0.01f64..0.8) {
        let (dists, d0, mu) = instance_from_seed(seed);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = kappa1_frac(&dists, &mu, &d0, lo).unwrap().value;
        let b = kappa1_frac(&dists, &mu, &d0, hi).unwrap().value;
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn dimensions_grow_with_tau(seed in any::<u64>(), t1 in 0.01f64..0.5, t2 in 0.01f64..0.5) {
        let (dists, d0, _) = instance_from_seed(seed);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = rsd_decision(&dists, &d0, lo, Kappa::K1).unwrap().value;
        let b = rsd_decision(&dists, &d0, hi, Kappa::K1).unwrap().value;
        prop_assert!(a <= b + 1e-9, "rsd({lo})={a} > rsd({hi})={b}");
    }

    #[test]
    fn randomized_dimension_dominates_subset_dimension(seed in any::<u64>(), tau in 0.02f64..0.4) {
        let (dists, d0, _) = instance_from_seed(seed);
        let r = rsd_decision(&dists, &d0, tau, Kappa::K1).unwrap().value;
        let s = sd_decision(&dists, &d0, tau).unwrap().value;
        if s.is_infinite() {
            prop_assert!(r.is_infinite());
        } else {
            prop_assert!(r >= s - 1e-9, "rsd {r} < sd {s}");
        }
    }

    #[test]
    fn randomized_and_deterministic_covers_are_close(seed in any::<u64>(), tau in 0.02f64..0.4) {
        let (dists, d0, _) = instance_from_seed(seed);
        prop_assume!(coverable(&dists, &d0, tau));
        let r = rsd_decision(&dists, &d0, tau, Kappa::K1).unwrap();
        let c = det_cover(&dists, &d0, tau, CoverMode::Exact).unwrap().value;
        let sd = sd_decision(&dists, &d0, tau).unwrap().value;
        prop_assert!(r.value <= c + 1e-9);
        prop_assert!(sd <= c + 1e-9);
        prop_assert!(c <= r.value * (dists.len() as f64).ln() + 1.0 + 1e-9);
        verify_cover_certificate(&r, &dists, &d0).unwrap();
    }

    #[test]
    fn greedy_cover_is_near_fractional(seed in any::<u64>(), tau in 0.02f64..0.4) {
        let (dists, d0, _) = instance_from_seed(seed);
        let family = achievable_subsets(&dists, &d0, tau, Kappa::K1).unwrap();
        prop_assume!(family.uncovered().is_empty());
        let frac = fractional_cover(&family).unwrap().value;
        let greedy = greedy_cover(&family).unwrap().len() as f64;
        prop_assert!(frac <= greedy + 1e-9);
        prop_assert!(greedy <= frac * (family.ground as f64).ln() + 1.0 + 1e-9, "greedy {greedy}, fractional {frac}");
        let game = GameMatrix::from_rows(
            &family.sets.iter().map(|s| (0..family.ground).map(|d| f64::from(u8::from(s.members.contains(&d)))).collect()).collect::<Vec<_>>(),
        ).unwrap();
        let v = zero_sum(&game).unwrap().value;
        prop_assert!((frac - 1.0 / v).abs() <= 1e-7);
    }

    #[test]
    fn lp_solutions_close_the_duality_gap(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=8);
        let mut lp = LinearProgram::maximize((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        for j in 0..n {
            lp.bound(j, 0.0, 1.0 + rng.random::<f64>());
        }
        for _ in 0..m {
            let row = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            lp.constrain(row, Relation::Le, rng.random_range(0.1..2.0));
        }
        let sol = lp_solve(&lp).unwrap();
        prop_assert!(sol.duality_gap <= 1e-7);
        prop_assert!(sol.primal_violation <= 1e-7);
        prop_assert!(sol.dual_violation <= 1e-7);
    }

    #[test]
    fn zero_sum_value_flips_under_negated_transpose(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let (r, c) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let game = GameMatrix::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let a = zero_sum(&game).unwrap();
        let b = zero_sum(&game.negated_transpose()).unwrap();
        prop_assert!((a.value + b.value).abs() <= 1e-7);
        prop_assert!((game.row_guarantee(&a.row_strategy) - a.value).abs() <= 1e-7);
        prop_assert!((game.col_guarantee(&a.col_strategy) - a.value).abs() <= 1e-7);
    }

    #[test]
    fn mw_regret_within_bound(seed in any::<u64>(), gamma in 0.01f64..0.9, steps in 1usize..300) {
        let mut rng = seeded_rng(seed);
        let m = rng.random_range(2..=12);
        let mut mw = MwState::uniform(m, gamma).unwrap();
        for _ in 0..steps {
            let z: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
            mw.update(&z).unwrap();
            let total: f64 = mw.weights().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
        let bound = (m as f64).ln() / (gamma * steps as f64) + gamma;
        prop_assert!(mw.max_pure_regret() <= bound + 1e-12);
    }

    #[test]
    fn norm_certificates_re_evaluate(seed in any::<u64>()) {
        let (dists, d0, mu) = instance_from_seed(seed);
        let rows = common::deltas(&dists, &d0);
        let k1 = kbar1(&dists, &mu, &d0).unwrap();
        let phi = k1.certificate.query.clone().unwrap();
        prop_assert!((average_discrimination(&rows, mu.weights(), &phi) - k1.value).abs() <= 1e-8);
        let k2 = kbar2(&dists, &mu, &d0).unwrap();
        if let Some(phi) = &k2.certificate.query {
            let norm: f64 = phi.iter().zip(d0.weights()).map(|(v, p)| p * v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-9);
            prop_assert!((average_discrimination(&rows, mu.weights(), phi) - k2.value).abs() <= 1e-8);
        }
        let frac = kappa1_frac(&dists, &mu, &d0, 0.1).unwrap();
        if let (Some(q), Some(subset)) = (&frac.certificate.query, &frac.certificate.subset) {
            let mass: f64 = subset.iter().map(|&i| mu.weights()[i]).sum();
            prop_assert!((mass - frac.value).abs() <= 1e-12);
            for &i in subset {
                prop_assert!(discrimination(Kappa::K1, dists[i].weights(), d0.weights(), q) > 0.1);
            }
        }
    }
}

#[test]
fn listed_subsets_are_separated_by_their_witness() {
    let mut rng = seeded_rng(42);
    for _ in 0..20 {
        let (dists, d0) = random_instance(&mut rng, 4, 5, 0.8);
        let fam = achievable_subsets(&dists, &d0, 0.1, Kappa::K1).unwrap();
        fam.verify(&dists, &d0).unwrap();
    }
}

#[test]
fn point_mass_radius_is_log_count() {
    let dom = FiniteDomain::indexed(5).unwrap();
    let dists: Vec<_> = (0..5).map(|i| FiniteDistribution::point_mass(dom.clone(), i).unwrap()).collect();
    let (r, _) = kl_radius_upper(&dists).unwrap();
    assert!((r - 5f64.ln()).abs() < 1e-12);
}

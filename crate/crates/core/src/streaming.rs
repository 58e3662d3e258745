//! Low-memory search over an i.i.d. sample stream.
//!
//! The MW estimate `D_t` is never stored: it is a function of the recorded
//! `(query index, sign)` pairs, so the persistent state is that history plus
//! one counter reused for every estimate.

use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::distributions::{dot, FiniteDistribution};
use crate::error::{Result, SqError};
use crate::games::Kappa;
use crate::oracles::sampler_for;
use crate::problems::ProblemSpec;
use crate::solvers::{CoverOracle, RunOutcome, SolverConfig, Tracker};

/// Bits of state carried between samples, and the bounds they are held to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BitLedger {
    pub persistent_bits: u64,
    /// Persistent state plus the scratch used inside one sample step.
    pub peak_bits: u64,
    #[serde(rename = "samples")]
    pub samples_consumed: u64,
    /// Bound on `persistent_bits`.
    pub bound: u64,
    pub within_bound: bool,
    pub sample_bound: u64,
}

/// One recorded update: which query of the plan at `D_t`, and its sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UpdateRecord {
    pub index: u32,
    pub negated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamRun {
    pub outcome: RunOutcome,
    pub updates: usize,
    pub update_budget: usize,
    pub seed: Option<u64>,
    pub ledger: BitLedger,
    #[serde(skip)]
    pub history: Vec<UpdateRecord>,
    /// `D_t` at exit, kept only so replays can be checked against it.
    #[serde(skip)]
    pub final_estimate: Vec<f64>,
}

/// Per-run constants derived from `τ`, `δ` and the class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StreamPlan {
    pub tau: f64,
    pub delta: f64,
    pub kl_bound: f64,
    /// Largest number of queries one cover plan may contain.
    pub cover_size: usize,
    pub update_budget: usize,
    /// Per-estimate failure probability `δτ²/(36·KL·q)`.
    pub delta_estimate: f64,
    /// `⌈18 ln(2/δ′)/τ²⌉`: enough for `±1` queries to be within `τ/3`.
    pub samples_per_estimate: u64,
    pub counter_width: u64,
    pub index_width: u64,
    pub persistent_bound: u64,
    pub sample_bound: u64,
}

fn bits_for(count: u64) -> u64 {
    // Bits needed to write any value in 0..count.
    if count <= 1 {
        0
    } else {
        u64::from(64 - (count - 1).leading_zeros())
    }
}

impl StreamPlan {
    pub fn new(problem: &ProblemSpec, tau: f64, delta: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(SqError::InvalidArgument(format!("need τ ∈ (0, 1] and δ ∈ (0, 1), got τ={tau}, δ={delta}")));
        }
        let (kl_bound, _) = crate::distributions::kl_radius_upper(&problem.dists)?;
        let cover_size = problem.dists.len().max(1);
        let update_budget = SolverConfig::det(tau).update_budget(kl_bound);
        let delta_estimate = delta * tau * tau / (36.0 * kl_bound.max(f64::MIN_POSITIVE) * cover_size as f64);
        let delta_estimate = delta_estimate.min(delta);
        let samples_per_estimate = (18.0 * (2.0 / delta_estimate).ln() / (tau * tau)).ceil() as u64;
        let counter_width = bits_for(samples_per_estimate + 1);
        let index_width = bits_for(cover_size as u64);
        let persistent_bound = update_budget as u64 * (index_width + 1) + counter_width;
        let sample_bound = (update_budget as u64 + 1) * cover_size as u64 * samples_per_estimate;
        Ok(StreamPlan {
            tau,
            delta,
            kl_bound,
            cover_size,
            update_budget,
            delta_estimate,
            samples_per_estimate,
            counter_width,
            index_width,
            persistent_bound,
            sample_bound,
        })
    }
}

/// An endless i.i.d. stream of domain indices drawn from `d`.
pub fn iid_stream<'a, R: Rng>(d: &FiniteDistribution, mut rng: R) -> Result<impl Iterator<Item = usize> + 'a>
where
    R: 'a,
{
    let sampler = sampler_for(d)?;
    Ok(std::iter::from_fn(move || Some(sampler.sample(&mut rng))))
}

fn check_sign_table(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| *v != 1.0 && *v != -1.0) {
        return Err(SqError::InvalidArgument("streamed estimates need ±1-valued queries".into()));
    }
    Ok(())
}

/// Runs the deterministic search over samples from `stream`, estimating each
/// cover query with its own block of fresh samples.
pub fn stream_solve<O, I>(
    problem: &ProblemSpec,
    oracle: &O,
    tau: f64,
    delta: f64,
    stream: &mut I,
    seed: Option<u64>,
) -> Result<StreamRun>
where
    O: CoverOracle + ?Sized,
    I: Iterator<Item = usize> + ?Sized,
{
    problem.validate()?;
    let plan = StreamPlan::new(problem, tau, delta)?;
    let cfg = SolverConfig::det(tau);
    let (mut tracker, _) = Tracker::new(problem, cfg.gamma(), false)?;
    let domain_width = bits_for(problem.domain().len() as u64);
    let mut history = Vec::new();
    let mut samples = 0u64;
    let mut peak = plan.counter_width;
    let outcome = loop {
        let dt = tracker.current().to_vec();
        let cover = oracle.plan(problem, &dt, tau, Kappa::K1, false)?;
        if cover.separation.queries.len() + cover.separation.extra.len() > plan.cover_size {
            return Err(SqError::InvalidArgument("cover plan is larger than the declared cover size".into()));
        }
        let mut found = None;
        for (i, phi) in cover.all_queries().enumerate() {
            check_sign_table(phi.values())?;
            let mut count = 0u64;
            for _ in 0..plan.samples_per_estimate {
                let x = stream.next().ok_or(SqError::StreamExhausted(samples))?;
                samples += 1;
                if phi.values()[x] > 0.0 {
                    count += 1;
                }
            }
            let persistent = history.len() as u64 * (plan.index_width + 1) + plan.counter_width;
            peak = peak.max(persistent + plan.index_width + plan.counter_width + domain_width);
            let estimate = (2.0 * count as f64 - plan.samples_per_estimate as f64) / plan.samples_per_estimate as f64;
            let p = dot(&dt, phi.values());
            if (p - estimate).abs() > 2.0 * tau / 3.0 {
                found = Some((i, p <= estimate, phi.values().to_vec()));
                break;
            }
        }
        match found {
            None => break RunOutcome::Solution { index: cover.solution, name: problem.solutions[cover.solution].clone() },
            Some((index, negated, values)) => {
                if history.len() >= plan.update_budget {
                    break RunOutcome::Failure { reason: format!("update budget {} exhausted", plan.update_budget) };
                }
                let psi: Vec<f64> = values.iter().map(|v| if negated { -v } else { *v }).collect();
                tracker.update(&psi)?;
                history.push(UpdateRecord { index: index as u32, negated });
            }
        }
    };
    let persistent_bits = history.len() as u64 * (plan.index_width + 1) + plan.counter_width;
    let ledger = BitLedger {
        persistent_bits,
        peak_bits: peak.max(persistent_bits),
        samples_consumed: samples,
        bound: plan.persistent_bound,
        within_bound: persistent_bits <= plan.persistent_bound && samples <= plan.sample_bound,
        sample_bound: plan.sample_bound,
    };
    Ok(StreamRun {
        outcome,
        updates: history.len(),
        update_budget: plan.update_budget,
        seed,
        ledger,
        history,
        final_estimate: tracker.current().to_vec(),
    })
}

/// Rebuilds `D_t` after the recorded updates from the history alone.
pub fn replay_history<O: CoverOracle + ?Sized>(
    problem: &ProblemSpec,
    oracle: &O,
    tau: f64,
    history: &[UpdateRecord],
) -> Result<Vec<f64>> {
    let cfg = SolverConfig::det(tau);
    let (mut tracker, _) = Tracker::new(problem, cfg.gamma(), false)?;
    for rec in history {
        let dt = tracker.current().to_vec();
        let cover = oracle.plan(problem, &dt, tau, Kappa::K1, false)?;
        let phi = cover
            .all_queries()
            .nth(rec.index as usize)
            .ok_or_else(|| SqError::VerificationFailed(format!("history names query {} beyond the plan", rec.index)))?;
        let psi: Vec<f64> = phi.values().iter().map(|v| if rec.negated { -v } else { *v }).collect();
        tracker.update(&psi)?;
    }
    Ok(tracker.current().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::seeded_rng;
    use crate::problems::biclique_search;
    use crate::solvers::GreedyCoverOracle;

    #[test]
    fn bit_widths() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(28), 5);
        assert_eq!(bits_for(32), 5);
        assert_eq!(bits_for(33), 6);
    }

    #[test]
    fn empty_stream_is_exhaustion() {
        let p = biclique_search(4, 2).unwrap();
        let mut empty = std::iter::empty();
        let err = stream_solve(&p, &GreedyCoverOracle, 0.2, 0.1, &mut empty, None).unwrap_err();
        assert!(matches!(err, SqError::StreamExhausted(0)));
    }

    #[test]
    fn universal_solution_costs_one_counter() {
        let mut p = biclique_search(4, 2).unwrap();
        p.solutions.push("anything".into());
        p.validity.push(vec![true; p.dists.len()]);
        let mut stream = iid_stream(&p.dists[0], seeded_rng(1)).unwrap();
        let run = stream_solve(&p, &GreedyCoverOracle, 0.2, 0.1, &mut stream, Some(1)).unwrap();
        let plan = StreamPlan::new(&p, 0.2, 0.1).unwrap();
        assert_eq!(run.updates, 0);
        assert_eq!(run.ledger.persistent_bits, plan.counter_width);
        assert_eq!(run.ledger.samples_consumed, 0);
    }

    #[test]
    fn history_replay_is_bitwise() {
        let p = biclique_search(6, 2).unwrap();
        let d = &p.dists[4];
        let mut stream = iid_stream(d, seeded_rng(9)).unwrap();
        let run = stream_solve(&p, &GreedyCoverOracle, 0.2, 0.1, &mut stream, Some(9)).unwrap();
        assert_eq!(run.outcome, RunOutcome::Solution { index: 4, name: p.solutions[4].clone() });
        assert!(run.ledger.within_bound);
        let replayed = replay_history(&p, &GreedyCoverOracle, 0.2, &run.history).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&replayed), bits(&run.final_estimate));
    }
}

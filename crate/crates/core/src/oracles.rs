//! Simulated statistical-query oracles with pluggable answer strategies.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{expectation, FiniteDistribution, QueryFn, RangeTag};
use crate::error::{Result, SqError};

/// Generator used for every randomized component.
pub type SqRng = ChaCha8Rng;

/// Absolute slack applied when checking an answer against its tolerance, so
/// that answers placed exactly on the boundary survive rounding.
pub const ORACLE_SLACK: f64 = 1e-12;

pub fn seeded_rng(seed: u64) -> SqRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for repetition `index` of an experiment seeded
/// with `seed`.
pub fn derived_rng(seed: u64, index: u64) -> SqRng {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleKind {
    Stat,
    Vstat,
    Vroot,
    OneStat,
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::Stat => "STAT",
            OracleKind::Vstat => "VSTAT",
            OracleKind::Vroot => "VROOT",
            OracleKind::OneStat => "ONE_STAT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OracleSpec {
    /// `|v − D[φ]| ≤ τ` for `φ : X → [−1, 1]`.
    Stat { tau: f64 },
    /// `|v − p| ≤ max{1/n, √(p/n)}`, or `max{1/n, √(p(1−p)/n)}` when strict.
    Vstat { n: f64, strict: bool },
    /// `|√v − √p| ≤ τ` for `φ : X → [0, 1]`.
    Vroot { tau: f64 },
    /// One `b`-bit function of a single fresh sample.
    OneStat { bits: u32 },
}

impl OracleSpec {
    pub fn stat(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(OracleSpec::Stat { tau })
    }

    pub fn vstat(n: f64) -> Result<Self> {
        if !(n >= 1.0 && n.is_finite()) {
            return Err(SqError::InvalidArgument(format!("VSTAT sample budget {n} must be ≥ 1")));
        }
        Ok(OracleSpec::Vstat { n, strict: false })
    }

    pub fn vstat_strict(n: f64) -> Result<Self> {
        OracleSpec::vstat(n).map(|_| OracleSpec::Vstat { n, strict: true })
    }

    pub fn vroot(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(OracleSpec::Vroot { tau })
    }

    pub fn one_stat(bits: u32) -> Result<Self> {
        if !(1..=64).contains(&bits) {
            return Err(SqError::InvalidArgument(format!("1-STAT width {bits} must be in 1..=64")));
        }
        Ok(OracleSpec::OneStat { bits })
    }

    pub fn kind(&self) -> OracleKind {
        match self {
            OracleSpec::Stat { .. } => OracleKind::Stat,
            OracleSpec::Vstat { .. } => OracleKind::Vstat,
            OracleSpec::Vroot { .. } => OracleKind::Vroot,
            OracleSpec::OneStat { .. } => OracleKind::OneStat,
        }
    }

    /// The numeric parameter: `τ`, `n` or `b`.
    pub fn param(&self) -> f64 {
        match *self {
            OracleSpec::Stat { tau } | OracleSpec::Vroot { tau } => tau,
            OracleSpec::Vstat { n, .. } => n,
            OracleSpec::OneStat { bits } => f64::from(bits),
        }
    }

    pub fn query_range(&self) -> RangeTag {
        match self {
            OracleSpec::Stat { .. } => RangeTag::Signed,
            _ => RangeTag::Unit,
        }
    }

    /// Additive tolerance around `p` (STAT and VSTAT).
    pub fn additive_tolerance(&self, p: f64) -> Option<f64> {
        match *self {
            OracleSpec::Stat { tau } => Some(tau),
            OracleSpec::Vstat { n, strict } => {
                let var = if strict { p * (1.0 - p) } else { p };
                Some((1.0 / n).max((var.max(0.0) / n).sqrt()))
            }
            _ => None,
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(SqError::InvalidArgument(format!("tolerance {tau} must lie in (0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeDirection {
    Up,
    Down,
    /// Toward the value the given distribution would produce.
    Toward(FiniteDistribution),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnswerStrategy {
    Exact,
    /// Empirical mean of `k` fresh samples.
    Sampled(usize),
    /// Answers as if the input were the given distribution.
    Reference(FiniteDistribution),
    /// True value moved by the full tolerance.
    Edge(EdgeDirection),
}

/// Answers one query; `rng` is required by `Sampled`.
pub fn answer<R: Rng + ?Sized>(
    spec: &OracleSpec,
    strategy: &AnswerStrategy,
    d: &FiniteDistribution,
    phi: &QueryFn,
    rng: Option<&mut R>,
) -> Result<f64> {
    check_range(spec, phi)?;
    let p = expectation(d, phi)?;
    match strategy {
        AnswerStrategy::Exact => Ok(p),
        AnswerStrategy::Reference(d0) => expectation(d0, phi),
        AnswerStrategy::Sampled(k) => {
            let rng = rng.ok_or_else(|| SqError::Oracle("sampled answers need a generator".into()))?;
            let sampler = sampler_for(d)?;
            Ok(sampled_mean(&sampler, phi.values(), *k, rng))
        }
        AnswerStrategy::Edge(direction) => {
            let up = match direction {
                EdgeDirection::Up => true,
                EdgeDirection::Down => false,
                EdgeDirection::Toward(r) => expectation(r, phi)? >= p,
            };
            Ok(edge_value(spec, p, up))
        }
    }
}

fn check_range(spec: &OracleSpec, phi: &QueryFn) -> Result<()> {
    match spec {
        OracleSpec::OneStat { .. } => Err(SqError::Oracle("1-STAT answers bit-valued functions; use OneStatOracle".into())),
        OracleSpec::Stat { .. } => Ok(()),
        _ if phi.range() == RangeTag::Unit || phi.values().iter().all(|v| RangeTag::Unit.contains(*v)) => Ok(()),
        _ => Err(SqError::Oracle(format!("{} needs a [0,1]-valued query", spec.kind().name()))),
    }
}

fn edge_value(spec: &OracleSpec, p: f64, up: bool) -> f64 {
    match *spec {
        OracleSpec::Vroot { tau } => {
            let r = p.max(0.0).sqrt();
            if up {
                (r + tau).powi(2)
            } else {
                (r - tau).max(0.0).powi(2)
            }
        }
        _ => {
            let t = spec.additive_tolerance(p).unwrap_or(0.0);
            if up {
                p + t
            } else {
                p - t
            }
        }
    }
}

pub(crate) fn sampler_for(d: &FiniteDistribution) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(d.weights().iter().copied()).map_err(|e| SqError::Oracle(format!("cannot sample: {e}")))
}

fn sampled_mean<R: Rng + ?Sized>(sampler: &WeightedIndex<f64>, values: &[f64], k: usize, rng: &mut R) -> f64 {
    let k = k.max(1);
    let total: f64 = (0..k).map(|_| values[sampler.sample(rng)]).sum();
    total / k as f64
}

/// Whether `v` is a legal answer to `φ` under `spec` when the input is `d`.
pub fn validate(spec: &OracleSpec, d: &FiniteDistribution, phi: &QueryFn, v: f64) -> bool {
    match expectation(d, phi) {
        Ok(p) => validate_value(spec, p, v),
        Err(_) => false,
    }
}

/// Tolerance check against a known true value `p`.
pub fn validate_value(spec: &OracleSpec, p: f64, v: f64) -> bool {
    if !v.is_finite() {
        return false;
    }
    match *spec {
        OracleSpec::Vroot { tau } => v >= 0.0 && (v.sqrt() - p.max(0.0).sqrt()).abs() <= tau + ORACLE_SLACK,
        OracleSpec::OneStat { .. } => true,
        _ => (v - p).abs() <= spec.additive_tolerance(p).unwrap_or(0.0) + ORACLE_SLACK,
    }
}

/// Converts an answer of `from` into an answer of `to`.
///
/// Supported pairs: a VSTAT(n) answer serves vSTAT(τ) when `n ≥ 1/τ²`, and a
/// vSTAT(τ) answer serves (non-strict) VSTAT(n) when `τ ≤ 1/(3√n)`.
pub fn bridge(from: &OracleSpec, to: &OracleSpec, answer_from: f64) -> Result<f64> {
    let supported = match (*from, *to) {
        (OracleSpec::Vstat { n, .. }, OracleSpec::Vroot { tau }) => n * tau * tau >= 1.0 - 1e-12,
        (OracleSpec::Vroot { tau }, OracleSpec::Vstat { n, strict: false }) => tau * 3.0 * n.sqrt() <= 1.0 + 1e-12,
        _ => false,
    };
    if !supported {
        return Err(SqError::UnsupportedBridge { from: format!("{from:?}"), to: format!("{to:?}") });
    }
    Ok(answer_from.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub index: usize,
    pub spec: OracleSpec,
    pub query: QueryFn,
    pub value: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

#[derive(Serialize)]
struct TranscriptLine {
    index: usize,
    kind: OracleKind,
    param: f64,
    value: f64,
    valid: bool,
}

impl Transcript {
    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn query_count(&self) -> usize {
        self.entries.len()
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.entries.is_empty() {
            return 1.0;
        }
        self.entries.iter().filter(|e| e.valid).count() as f64 / self.entries.len() as f64
    }

    pub fn all_valid(&self) -> bool {
        self.entries.iter().all(|e| e.valid)
    }

    pub fn push(&mut self, spec: OracleSpec, query: QueryFn, value: f64, valid: bool) {
        let index = self.entries.len();
        self.entries.push(TranscriptEntry { index, spec, query, value, valid });
    }

    /// One JSON object per line: `{index, kind, param, value, valid}`.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let line = TranscriptLine {
                index: e.index,
                kind: e.spec.kind(),
                param: e.spec.param(),
                value: e.value,
                valid: e.valid,
            };
            out.push_str(&serde_json::to_string(&line).expect("transcript line serializes"));
            out.push('\n');
        }
        out
    }
}

/// An oracle bound to a hidden input distribution, recording every query.
#[derive(Debug, Clone)]
pub struct OracleSession {
    spec: OracleSpec,
    strategy: AnswerStrategy,
    target: FiniteDistribution,
    rng: Option<SqRng>,
    sampler: Option<WeightedIndex<f64>>,
    transcript: Transcript,
}

impl OracleSession {
    pub fn new(spec: OracleSpec, strategy: AnswerStrategy, target: FiniteDistribution, rng: Option<SqRng>) -> Result<Self> {
        if matches!(spec, OracleSpec::OneStat { .. }) {
            return Err(SqError::Oracle("1-STAT is served by OneStatOracle".into()));
        }
        let sampler = match strategy {
            AnswerStrategy::Sampled(_) => {
                if rng.is_none() {
                    return Err(SqError::Oracle("sampled answers need a generator".into()));
                }
                Some(sampler_for(&target)?)
            }
            _ => None,
        };
        Ok(OracleSession { spec, strategy, target, rng, sampler, transcript: Transcript::default() })
    }

    pub fn exact(spec: OracleSpec, target: FiniteDistribution) -> Self {
        OracleSession::new(spec, AnswerStrategy::Exact, target, None).expect("exact session needs nothing else")
    }

    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    pub fn target(&self) -> &FiniteDistribution {
        &self.target
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn ask(&mut self, phi: &QueryFn) -> Result<f64> {
        check_range(&self.spec, phi)?;
        let p = expectation(&self.target, phi)?;
        let v = match (&self.strategy, &self.sampler, self.rng.as_mut()) {
            (AnswerStrategy::Sampled(k), Some(s), Some(rng)) => sampled_mean(s, phi.values(), *k, rng),
            (AnswerStrategy::Exact, _, _) => p,
            (strategy, _, rng) => answer(&self.spec, strategy, &self.target, phi, rng)?,
        };
        let valid = validate_value(&self.spec, p, v);
        self.transcript.push(self.spec, phi.clone(), v, valid);
        Ok(v)
    }

    /// Ensures this session is at least as accurate as STAT(`tau`) (or
    /// vSTAT(`tau`) for a root-scale session).
    pub fn require_tolerance(&self, kind: OracleKind, tau: f64) -> Result<()> {
        let ok = match (self.spec, kind) {
            (OracleSpec::Stat { tau: t }, OracleKind::Stat) | (OracleSpec::Vroot { tau: t }, OracleKind::Vroot) => {
                t <= tau * (1.0 + 1e-12)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(SqError::Oracle(format!("session {:?} is not a {}({tau}) oracle", self.spec, kind.name())))
        }
    }
}

/// 1-STAT(b): each call consumes exactly one sample.
#[derive(Debug, Clone)]
pub struct OneStatOracle {
    bits: u32,
    sampler: WeightedIndex<f64>,
    samples: u64,
}

impl OneStatOracle {
    pub fn new(d: &FiniteDistribution, bits: u32) -> Result<Self> {
        OracleSpec::one_stat(bits)?;
        Ok(OneStatOracle { bits, sampler: sampler_for(d)?, samples: 0 })
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// `φ_b(x)` for a fresh `x ~ D`; every table entry must fit in `b` bits.
    pub fn query<R: Rng + ?Sized>(&mut self, table: &[u64], rng: &mut R) -> Result<u64> {
        if table.len() != self.sampler_len() {
            return Err(SqError::DomainMismatch("1-STAT table size differs from the domain".into()));
        }
        if self.bits < 64 {
            if let Some((i, v)) = table.iter().enumerate().find(|(_, v)| **v >> self.bits != 0) {
                return Err(SqError::Oracle(format!("entry {v} at {i} does not fit in {} bits", self.bits)));
            }
        }
        self.samples += 1;
        Ok(table[self.sampler.sample(rng)])
    }

    fn sampler_len(&self) -> usize {
        self.sampler.weights().count()
    }
}

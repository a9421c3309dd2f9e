//! Decision procedures for flat machines.
//!
//! Reachability questions are answered by a backward search over canonical
//! runs: a run through a flat machine visits each location at most once per
//! pass, and all iterations of a cycle can be grouped at the location where
//! the run leaves that cycle. The search walks rules backwards with `pr`,
//! accelerates each cycle with the minimal elements of `Pre[σ*]`, and emits
//! a witness that [`validate_witness`] re-checks independently.

mod bounds;
mod search;
mod witness;

use std::time::Instant;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::acceleration::{self, increasing_certificate, is_increasing, pr_omega, rep_cov_constraints, OmegaResult, RepCovStatus};
use crate::machine::{analyze_flatness, FlatnessInfo, LocationId, Machine, RuleId};
use crate::slp::SlpError;
use crate::words::{Letter, Word};

pub use bounds::{Bound, CountBounds};
pub use search::{Backend, Content};
pub use witness::{
    parse_witness_json, validate_witness, witness_to_json, LoopCertificate, Segment, ValidationError, Witness,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    ReachExact,
    Coverability,
    Nonterm,
    Buchi,
    Unbounded,
    Repcov,
}

impl QueryKind {
    pub fn name(self) -> &'static str {
        match self {
            QueryKind::ReachExact => "reach_exact",
            QueryKind::Coverability => "coverability",
            QueryKind::Nonterm => "nonterm",
            QueryKind::Buchi => "buchi",
            QueryKind::Unbounded => "unbounded",
            QueryKind::Repcov => "repcov",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "reach_exact" => QueryKind::ReachExact,
            "coverability" => QueryKind::Coverability,
            "nonterm" => QueryKind::Nonterm,
            "buchi" => QueryKind::Buchi,
            "unbounded" => QueryKind::Unbounded,
            "repcov" => QueryKind::Repcov,
            _ => return None,
        })
    }

    /// Kinds whose answer is a run reaching a configuration that can loop.
    pub fn is_liveness(self) -> bool {
        matches!(self, QueryKind::Nonterm | QueryKind::Buchi | QueryKind::Unbounded | QueryKind::Repcov)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub kind: QueryKind,
    pub source: (LocationId, Word),
    /// Target configuration for reach, cover and repcov.
    pub target: Option<(LocationId, Word)>,
    pub fair_set: Vec<LocationId>,
}

impl Query {
    pub fn reach(src: (LocationId, Word), tgt: (LocationId, Word)) -> Self {
        Query { kind: QueryKind::ReachExact, source: src, target: Some(tgt), fair_set: Vec::new() }
    }

    pub fn cover(src: (LocationId, Word), tgt: (LocationId, Word)) -> Self {
        Query { kind: QueryKind::Coverability, source: src, target: Some(tgt), fair_set: Vec::new() }
    }

    pub fn nonterm(src: (LocationId, Word)) -> Self {
        Query { kind: QueryKind::Nonterm, source: src, target: None, fair_set: Vec::new() }
    }

    pub fn buchi(src: (LocationId, Word), fair: Vec<LocationId>) -> Self {
        Query { kind: QueryKind::Buchi, source: src, target: None, fair_set: fair }
    }

    pub fn unbounded(src: (LocationId, Word)) -> Self {
        Query { kind: QueryKind::Unbounded, source: src, target: None, fair_set: Vec::new() }
    }

    pub fn repcov(src: (LocationId, Word), tgt: (LocationId, Word)) -> Self {
        Query { kind: QueryKind::Repcov, source: src, target: Some(tgt), fair_set: Vec::new() }
    }

    pub fn to_json(&self, m: &Machine) -> serde_json::Value {
        let mut v = serde_json::json!({
            "kind": self.kind.name(),
            "source": m.format_config(self.source.0, &self.source.1),
        });
        if let Some((q, w)) = &self.target {
            v["target"] = m.format_config(*q, w).into();
        }
        if self.kind == QueryKind::Buchi {
            v["fair_set"] = self.fair_set.iter().map(|&q| m.locations[q].clone()).collect::<Vec<_>>().into();
        }
        v
    }

    pub fn from_json(m: &Machine, v: &serde_json::Value) -> Result<Self, String> {
        let kind = v["kind"].as_str().and_then(QueryKind::from_name).ok_or("missing or unknown query kind")?;
        let source = m.parse_config(v["source"].as_str().ok_or("missing source")?)?;
        let target = match v.get("target").and_then(|t| t.as_str()) {
            Some(t) => Some(m.parse_config(t)?),
            None => None,
        };
        let mut fair_set = Vec::new();
        if let Some(arr) = v.get("fair_set").and_then(|f| f.as_array()) {
            for q in arr {
                let name = q.as_str().ok_or("fair_set entries must be strings")?;
                fair_set.push(m.location(name).ok_or_else(|| format!("unknown location `{name}`"))?);
            }
        }
        let q = Query { kind, source, target, fair_set };
        if matches!(kind, QueryKind::ReachExact | QueryKind::Coverability | QueryKind::Repcov) && q.target.is_none() {
            return Err(format!("{} query needs a target", kind.name()));
        }
        Ok(q)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stats {
    pub states: u64,
    pub candidates: u64,
    pub pruned: u64,
    pub memo_hits: u64,
    pub largest_basis: u64,
    pub loop_targets: u64,
    pub wall_time_ms: f64,
    /// Set when a repeated-coverability constraint list hit its cap.
    pub cap_exceeded: bool,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub answer: bool,
    pub witness: Option<Witness>,
    pub stats: Stats,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("machine is not flat: cycles {0:?} and {1:?} share a location")]
    NotFlat(Vec<RuleId>, Vec<RuleId>),
    #[error("unknown location id {0}")]
    BadLocation(LocationId),
    #[error("letter {0} is outside the machine alphabet")]
    BadLetter(Letter),
    #[error("query of kind {0} is missing its target")]
    MissingTarget(&'static str),
    #[error(transparent)]
    Slp(#[from] SlpError),
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub backend: Backend,
    /// Contents up to this length are kept as plain words.
    pub plain_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { backend: Backend::Hybrid, plain_threshold: 64 }
    }
}

/// Ready-to-query view of a flat machine.
pub struct Solver<'m> {
    pub machine: &'m Machine,
    pub info: FlatnessInfo,
    pub options: SolverOptions,
}

impl<'m> Solver<'m> {
    pub fn new(machine: &'m Machine) -> Result<Self, SolverError> {
        Self::with_options(machine, SolverOptions::default())
    }

    pub fn with_options(machine: &'m Machine, options: SolverOptions) -> Result<Self, SolverError> {
        let info = analyze_flatness(machine);
        if let Some((a, b)) = &info.offending {
            return Err(SolverError::NotFlat(a.clone(), b.clone()));
        }
        Ok(Solver { machine, info, options })
    }

    fn check_config(&self, c: &(LocationId, Word)) -> Result<(), SolverError> {
        if c.0 >= self.machine.locations.len() {
            return Err(SolverError::BadLocation(c.0));
        }
        if let Some(&a) = c.1.iter().find(|&&a| a as usize >= self.machine.alphabet.len()) {
            return Err(SolverError::BadLetter(a));
        }
        Ok(())
    }

    pub fn decide(&self, q: &Query) -> Result<Verdict, SolverError> {
        self.check_config(&q.source)?;
        if let Some(t) = &q.target {
            self.check_config(t)?;
        }
        for &f in &q.fair_set {
            if f >= self.machine.locations.len() {
                return Err(SolverError::BadLocation(f));
            }
        }
        let start = Instant::now();
        let mut v = match q.kind {
            QueryKind::ReachExact | QueryKind::Coverability => {
                let tgt = q.target.clone().ok_or(SolverError::MissingTarget(q.kind.name()))?;
                let exact = q.kind == QueryKind::ReachExact;
                let (res, stats) = self.run_search(&q.source, &tgt, exact)?;
                Verdict {
                    answer: res.is_some(),
                    witness: res.map(|segments| Witness { segments, target: tgt.1.clone(), certificate: None }),
                    stats,
                }
            }
            QueryKind::Nonterm | QueryKind::Buchi | QueryKind::Unbounded => self.decide_loop(q)?,
            QueryKind::Repcov => self.decide_repcov(q)?,
        };
        v.stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(v)
    }

    /// Backward search in a thread with a large stack: search depth grows
    /// with the number of locations.
    fn run_search(
        &self,
        src: &(LocationId, Word),
        tgt: &(LocationId, Word),
        exact: bool,
    ) -> Result<(Option<Vec<Segment>>, Stats), SolverError> {
        std::thread::scope(|s| {
            std::thread::Builder::new()
                .stack_size(1 << 29)
                .spawn_scoped(s, || search::Search::new(self, src).run(tgt, exact))
                .expect("spawn search thread")
                .join()
                .expect("search thread panicked")
        })
    }

    /// Cycle locations q' whose ω-fixpoint is a word y', with the
    /// location's loop condition checked, tried as coverability targets.
    fn decide_loop(&self, q: &Query) -> Result<Verdict, SolverError> {
        let mut stats = Stats::default();
        for loc in 0..self.machine.locations.len() {
            if !self.info.on_cycle(loc) {
                continue;
            }
            if q.kind == QueryKind::Buchi && !q.fair_set.contains(&loc) {
                continue;
            }
            let sigma = &self.info.cycles[loc];
            if q.kind == QueryKind::Unbounded && !is_increasing(sigma) {
                continue;
            }
            let OmegaResult::Word(y) = pr_omega(sigma) else { continue };
            stats.loop_targets += 1;
            let (res, st) = self.run_search(&q.source, &(loc, y.clone()), false)?;
            merge(&mut stats, &st);
            if let Some(segments) = res {
                let embedding = if q.kind == QueryKind::Unbounded { increasing_certificate(sigma) } else { None };
                let certificate = Some(LoopCertificate { location: loc, embedding, constraints: Vec::new() });
                return Ok(Verdict {
                    answer: true,
                    witness: Some(Witness { segments, target: y, certificate }),
                    stats,
                });
            }
        }
        Ok(Verdict { answer: false, witness: None, stats })
    }

    /// Repeated coverability: reach some minimal element of the constraint
    /// intersection at q'.
    fn decide_repcov(&self, q: &Query) -> Result<Verdict, SolverError> {
        let mut stats = Stats::default();
        let (loc, x) = q.target.clone().ok_or(SolverError::MissingTarget("repcov"))?;
        if !self.info.on_cycle(loc) {
            return Ok(Verdict { answer: false, witness: None, stats });
        }
        let sigma = &self.info.cycles[loc];
        let c = rep_cov_constraints(sigma, &x);
        if c.status == RepCovStatus::CapExceeded {
            stats.cap_exceeded = true;
            return Ok(Verdict { answer: false, witness: None, stats });
        }
        let targets = match acceleration::minimal_common_superwords(&c.constraints, REPCOV_TARGET_LIMIT) {
            Some(t) => t,
            // Too many minimal elements: fall back to the concatenation,
            // which is one member of the intersection.
            None => vec![c.constraints.concat()],
        };
        stats.loop_targets = targets.len() as u64;
        for z in targets {
            let (res, st) = self.run_search(&q.source, &(loc, z.clone()), false)?;
            merge(&mut stats, &st);
            if let Some(segments) = res {
                let certificate = Some(LoopCertificate { location: loc, embedding: None, constraints: c.constraints.clone() });
                return Ok(Verdict { answer: true, witness: Some(Witness { segments, target: z, certificate }), stats });
            }
        }
        Ok(Verdict { answer: false, witness: None, stats })
    }
}

const REPCOV_TARGET_LIMIT: usize = 4096;

fn merge(into: &mut Stats, from: &Stats) {
    into.states += from.states;
    into.candidates += from.candidates;
    into.pruned += from.pruned;
    into.memo_hits += from.memo_hits;
    into.largest_basis = into.largest_basis.max(from.largest_basis);
}

pub fn decide_coverability(m: &Machine, src: (LocationId, Word), tgt: (LocationId, Word)) -> Result<Verdict, SolverError> {
    Solver::new(m)?.decide(&Query::cover(src, tgt))
}

pub fn decide_reach_exact(m: &Machine, src: (LocationId, Word), tgt: (LocationId, Word)) -> Result<Verdict, SolverError> {
    Solver::new(m)?.decide(&Query::reach(src, tgt))
}

pub fn decide_nonterm(m: &Machine, src: (LocationId, Word)) -> Result<Verdict, SolverError> {
    Solver::new(m)?.decide(&Query::nonterm(src))
}

pub fn decide_buchi(m: &Machine, src: (LocationId, Word), fair: Vec<LocationId>) -> Result<Verdict, SolverError> {
    Solver::new(m)?.decide(&Query::buchi(src, fair))
}

pub fn decide_unbounded(m: &Machine, src: (LocationId, Word)) -> Result<Verdict, SolverError> {
    Solver::new(m)?.decide(&Query::unbounded(src))
}

pub fn decide_repcov(m: &Machine, src: (LocationId, Word), tgt: (LocationId, Word)) -> Result<Verdict, SolverError> {
    Solver::new(m)?.decide(&Query::repcov(src, tgt))
}

/// Verdict envelope `{query, answer, witness?, stats}`.
pub fn verdict_to_json(m: &Machine, q: &Query, v: &Verdict) -> serde_json::Value {
    let mut out = serde_json::json!({
        "query": q.to_json(m),
        "answer": v.answer,
        "stats": serde_json::to_value(&v.stats).expect("stats serialise"),
    });
    if let Some(w) = &v.witness {
        out["witness"] = witness_to_json(m, w);
    }
    out
}

pub(crate) fn big(n: usize) -> BigUint {
    BigUint::from(n)
}

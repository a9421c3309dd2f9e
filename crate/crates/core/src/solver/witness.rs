//! Run certificates and their checker.
//!
//! A witness lists the locations `q_0 … q_m` of a canonical run with, for
//! each, the channel content `Z_i` on arrival, the number `n_i` of
//! iterations of the cycle through `q_i`, and the rule leaving `q_i`. The
//! content after the last iteration is the plain target word `Y`. The
//! checker rebuilds every `Z_i` backwards from `Y` with the compressed `pr`
//! and never looks at solver state.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::machine::{analyze_flatness, rea, wri, Action, FlatnessInfo, LocationId, Machine, RuleId};
use crate::slp::{self, Slp};
use crate::words::{self, Letter, Word};

use super::{Query, QueryKind};

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub location: LocationId,
    pub content: Slp,
    pub exponent: BigUint,
    /// Rule from this location to the next segment's; `None` on the last.
    pub rule: Option<RuleId>,
}

/// The looping part of a liveness witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopCertificate {
    pub location: LocationId,
    /// Positions embedding `rea(σ)^ℓ` into `wri(σ)^{ℓ−1}` (unboundedness).
    pub embedding: Option<Vec<usize>>,
    /// Iterated constraints `pr(σ^i, x)` (repeated coverability).
    pub constraints: Vec<Word>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub segments: Vec<Segment>,
    pub target: Word,
    pub certificate: Option<LoopCertificate>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("witness has no segments")]
    Empty,
    #[error("segment {index}: {msg}")]
    Segment { index: usize, msg: String },
    #[error("target: {0}")]
    Target(String),
    #[error("certificate: {0}")]
    Certificate(String),
    #[error("malformed witness: {0}")]
    Format(String),
}

fn seg_err(index: usize, msg: impl Into<String>) -> ValidationError {
    ValidationError::Segment { index, msg: msg.into() }
}

/// Largest constraint list the checker recomputes for repeated coverability.
const CONSTRAINT_LIMIT: usize = 1 << 12;

/// Check `w` against the machine and query.
pub fn validate_witness(m: &Machine, q: &Query, w: &Witness) -> Result<(), ValidationError> {
    if w.segments.is_empty() {
        return Err(ValidationError::Empty);
    }
    let info = analyze_flatness(m);
    let nloc = m.locations.len();
    let last = w.segments.len() - 1;

    // Shape: locations, rule chain, distinctness.
    let mut seen = vec![false; nloc];
    for (i, s) in w.segments.iter().enumerate() {
        if s.location >= nloc {
            return Err(seg_err(i, "unknown location"));
        }
        if std::mem::replace(&mut seen[s.location], true) {
            return Err(seg_err(i, "location visited twice"));
        }
        match (s.rule, i == last) {
            (None, true) => {}
            (Some(_), true) => return Err(seg_err(i, "last segment has an outgoing rule")),
            (None, false) => return Err(seg_err(i, "missing rule to the next segment")),
            (Some(r), false) => {
                let rule = m.rules.get(r).ok_or_else(|| seg_err(i, "unknown rule"))?;
                if rule.from != s.location || rule.to != w.segments[i + 1].location {
                    return Err(seg_err(i, "rule does not connect consecutive locations"));
                }
            }
        }
        if !s.exponent.is_zero() && !info.on_cycle(s.location) {
            return Err(seg_err(i, "nonzero exponent at a location on no cycle"));
        }
    }
    if w.segments[0].location != q.source.0 {
        return Err(seg_err(0, "run does not start at the source location"));
    }

    check_target(q, w, &info)?;

    // Contents, from the target backwards.
    let base = slp::random_base();
    let single_exact = q.kind == QueryKind::ReachExact && w.segments.len() == 1;
    let mut after = Slp::from_plain(&w.target);
    for i in (0..=last).rev() {
        let s = &w.segments[i];
        let sigma = &info.cycles[s.location];
        let z = slp::pr_iter(sigma, &after, &s.exponent).map_err(|e| seg_err(i, e.to_string()))?;
        if z.len() != s.content.len() || !slp::equal_with(&z, &s.content, base) {
            return Err(seg_err(i, "content differs from the recomputed predecessor"));
        }
        // A run between different configurations needs at least one step;
        // otherwise the empty run is the least one.
        let lb = if single_exact && q.source.1 != w.target { BigUint::one() } else { BigUint::zero() };
        if s.exponent > lb {
            let prev = slp::pr_iter(sigma, &after, &(&s.exponent - 1u32)).map_err(|e| seg_err(i, e.to_string()))?;
            if prev.len() == z.len() && slp::equal_with(&prev, &z, base) {
                return Err(seg_err(i, "exponent is not the least one giving this content"));
            }
        }
        if i > 0 {
            let r = w.segments[i - 1].rule.expect("checked above");
            after = slp::pr(&m.rules[r].actions, &s.content).map_err(|e| seg_err(i - 1, e.to_string()))?;
        }
    }
    let first = &w.segments[0];
    if !slp::subword_rev(&first.content, &q.source.1) {
        return Err(seg_err(0, "content is not a subword of the source word"));
    }
    if single_exact && first.exponent.is_zero() && q.source.1 != w.target {
        return Err(seg_err(0, "empty run between different configurations"));
    }
    Ok(())
}

fn check_target(q: &Query, w: &Witness, info: &FlatnessInfo) -> Result<(), ValidationError> {
    let end = w.segments.last().expect("nonempty").location;
    let y = &w.target;
    match q.kind {
        QueryKind::ReachExact | QueryKind::Coverability => {
            let (t, x) = q.target.as_ref().ok_or_else(|| ValidationError::Target("query has no target".into()))?;
            if end != *t {
                return Err(ValidationError::Target("run ends at another location".into()));
            }
            let ok = if q.kind == QueryKind::ReachExact { y == x } else { words::is_subword(x, y) };
            if !ok {
                return Err(ValidationError::Target("final word does not match the target".into()));
            }
            if w.certificate.is_some() {
                return Err(ValidationError::Certificate("unexpected loop certificate".into()));
            }
            Ok(())
        }
        _ => {
            let c = w.certificate.as_ref().ok_or_else(|| ValidationError::Certificate("missing".into()))?;
            if c.location != end {
                return Err(ValidationError::Certificate("loop location is not where the run ends".into()));
            }
            let sigma = &info.cycles[end];
            if !info.on_cycle(end) {
                return Err(ValidationError::Certificate("loop location lies on no cycle".into()));
            }
            match q.kind {
                QueryKind::Buchi if !q.fair_set.contains(&end) => {
                    return Err(ValidationError::Certificate("loop location is not fair".into()));
                }
                QueryKind::Repcov => {
                    let (t, x) = q.target.as_ref().ok_or_else(|| ValidationError::Target("query has no target".into()))?;
                    if end != *t {
                        return Err(ValidationError::Target("run ends at another location".into()));
                    }
                    let ys = constraints(sigma, x)
                        .ok_or_else(|| ValidationError::Certificate("constraints do not stabilise".into()))?;
                    if ys != c.constraints {
                        return Err(ValidationError::Certificate("constraint list differs".into()));
                    }
                    if let Some(i) = ys.iter().position(|z| !words::is_subword(z, y)) {
                        return Err(ValidationError::Target(format!("final word misses constraint {i}")));
                    }
                    return Ok(());
                }
                _ => {}
            }
            if words::pr(sigma, y) != *y {
                return Err(ValidationError::Certificate("final word is not a fixpoint of the cycle".into()));
            }
            if q.kind == QueryKind::Unbounded {
                let e = c.embedding.as_ref().ok_or_else(|| ValidationError::Certificate("missing embedding".into()))?;
                check_embedding(&rea(sigma), &wri(sigma), e).map_err(ValidationError::Certificate)?;
            }
            Ok(())
        }
    }
}

/// `pos` embeds `u^ℓ` into `v^{ℓ−1}` with `ℓ = |v| > 0`.
fn check_embedding(u: &[Letter], v: &[Letter], pos: &[usize]) -> Result<(), String> {
    let l = v.len();
    if l == 0 {
        return Err("cycle writes nothing".into());
    }
    if pos.len() != u.len() * l {
        return Err("embedding has the wrong length".into());
    }
    let big = (l - 1) * l;
    let mut prev: Option<usize> = None;
    for (i, &p) in pos.iter().enumerate() {
        if p >= big || prev.is_some_and(|q| p <= q) || v[p % l] != u[i % u.len()] {
            return Err(format!("bad embedding position {i}"));
        }
        prev = Some(p);
    }
    Ok(())
}

/// `x, pr(σ, x), pr(σ², x), …` up to the first element implied by an earlier
/// one, or `None` past the limit.
fn constraints(sigma: &[Action], x: &[Letter]) -> Option<Vec<Word>> {
    let mut ys = vec![x.to_vec()];
    while ys.len() < CONSTRAINT_LIMIT {
        let next = words::pr(sigma, ys.last().expect("nonempty"));
        if ys.iter().any(|y| words::is_subword(&next, y)) {
            return Some(ys);
        }
        ys.push(next);
    }
    None
}

pub fn witness_to_json(m: &Machine, w: &Witness) -> Value {
    let name = |a| m.alphabet[a as usize].clone();
    let segments: Vec<Value> = w
        .segments
        .iter()
        .map(|s| {
            json!({
                "location": m.locations[s.location],
                "slp_grammar": s.content.to_grammar(name),
                "slp_len": s.content.len(),
                "exponent": s.exponent.to_string(),
                "rule_id": s.rule.map(|r| m.rules[r].name.clone()),
            })
        })
        .collect();
    let certificate = match &w.certificate {
        None => Value::Null,
        Some(c) => json!({
            "location": m.locations[c.location],
            "embedding": c.embedding,
            "constraints": c.constraints.iter().map(|y| m.format_word(y)).collect::<Vec<_>>(),
        }),
    };
    json!({ "segments": segments, "final": m.format_word(&w.target), "certificate": certificate })
}

pub fn parse_witness_json(m: &Machine, v: &Value) -> Result<Witness, ValidationError> {
    let bad = |s: &str| ValidationError::Format(s.to_string());
    let loc = |v: &Value| -> Result<LocationId, ValidationError> {
        let n = v.as_str().ok_or_else(|| bad("location must be a string"))?;
        m.location(n).ok_or_else(|| ValidationError::Format(format!("unknown location `{n}`")))
    };
    let word = |v: &Value| -> Result<Word, ValidationError> {
        let s = v.as_str().ok_or_else(|| bad("word must be a string"))?;
        m.parse_word(s).map_err(|e| ValidationError::Format(e.to_string()))
    };
    let arr = v["segments"].as_array().ok_or_else(|| bad("missing segments"))?;
    let mut segments = Vec::with_capacity(arr.len());
    for s in arr {
        let grammar = s["slp_grammar"].as_str().ok_or_else(|| bad("missing slp_grammar"))?;
        let content = Slp::from_grammar(grammar, |a| m.letter(a)).map_err(|e| ValidationError::Format(e.to_string()))?;
        let exponent = s["exponent"]
            .as_str()
            .and_then(|e| e.parse::<BigUint>().ok())
            .ok_or_else(|| bad("exponent must be a decimal string"))?;
        let rule = match &s["rule_id"] {
            Value::Null => None,
            Value::String(r) => {
                Some(m.rule_by_name(r).ok_or_else(|| ValidationError::Format(format!("unknown rule `{r}`")))?)
            }
            _ => return Err(bad("rule_id must be a string or null")),
        };
        segments.push(Segment { location: loc(&s["location"])?, content, exponent, rule });
    }
    let target = word(&v["final"])?;
    let certificate = match &v["certificate"] {
        Value::Null => None,
        c => {
            let embedding = match &c["embedding"] {
                Value::Null => None,
                e => Some(
                    e.as_array()
                        .ok_or_else(|| bad("embedding must be an array"))?
                        .iter()
                        .map(|p| p.as_u64().map(|p| p as usize).ok_or_else(|| bad("embedding entries are integers")))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            };
            let constraints = match &c["constraints"] {
                Value::Null => Vec::new(),
                cs => cs
                    .as_array()
                    .ok_or_else(|| bad("constraints must be an array"))?
                    .iter()
                    .map(word)
                    .collect::<Result<Vec<_>, _>>()?,
            };
            Some(LoopCertificate { location: loc(&c["location"])?, embedding, constraints })
        }
    };
    Ok(Witness { segments, target, certificate })
}

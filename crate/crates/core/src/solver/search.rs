//! Backward depth-first search over canonical runs.
//!
//! States come in two flavours. `enter(p, y)` asks for a run reaching `↑y`
//! at p, where the cycle through p may still be iterated at p itself.
//! `arc(p, e, y)` asks for a run reaching `↑y` at p on the way along the
//! cycle towards its exit location e, without wrapping around. The state
//! graph is acyclic because flat machines never re-enter a component.
//!
//! Failures are upward closed (a larger target is harder to reach), so each
//! state keeps the failed plain targets and skips any target above one.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::acceleration::{self, Kappa, PowerMap};
use crate::machine::{rea, wri, Action, LocationId};
use crate::slp::{self, Slp, SlpError};
use crate::words::{self, Letter, Word};

use super::bounds::{CountBounds, OrderBounds};
use super::{big, Segment, Solver, SolverError, Stats};

/// Word representation used by the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Plain words while short, SLPs beyond the threshold.
    Hybrid,
    Plain,
    Slp,
}

#[derive(Clone, Debug)]
pub enum Content {
    Plain(Word),
    Compressed(Slp),
}

impl Content {
    pub fn len(&self) -> u64 {
        match self {
            Content::Plain(w) => w.len() as u64,
            Content::Compressed(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_slp(&self) -> Slp {
        match self {
            Content::Plain(w) => Slp::from_plain(w),
            Content::Compressed(s) => s.clone(),
        }
    }

    /// `self ⊑ w`.
    pub fn below(&self, w: &[Letter]) -> bool {
        match self {
            Content::Plain(x) => words::is_subword(x, w),
            Content::Compressed(s) => slp::subword_rev(s, w),
        }
    }

    /// `w ⊑ self`.
    pub fn above(&self, w: &[Letter]) -> bool {
        match self {
            Content::Plain(x) => words::is_subword(w, x),
            Content::Compressed(s) => slp::subword(w, s),
        }
    }

    pub fn counts(&self, nletters: usize) -> Vec<u64> {
        match self {
            Content::Plain(w) => {
                let mut c = vec![0; nletters];
                for &a in w {
                    c[a as usize] += 1;
                }
                c
            }
            Content::Compressed(s) => s.letter_counts(nletters),
        }
    }
}

struct Repr {
    backend: Backend,
    threshold: usize,
}

impl Repr {
    fn norm_slp(&self, s: Slp) -> Content {
        match self.backend {
            Backend::Slp => Content::Compressed(s),
            _ if s.len() <= self.threshold as u64 || self.backend == Backend::Plain => {
                Content::Plain(s.expand(u64::MAX).expect("no limit"))
            }
            _ => Content::Compressed(s),
        }
    }

    fn norm_plain(&self, w: Word) -> Content {
        match self.backend {
            Backend::Slp => Content::Compressed(Slp::from_plain(&w)),
            Backend::Hybrid if w.len() > self.threshold => Content::Compressed(Slp::from_plain(&w)),
            _ => Content::Plain(w),
        }
    }

    fn pr(&self, s: &[Action], y: &Content) -> Result<Content, SlpError> {
        match y {
            Content::Plain(w) => Ok(self.norm_plain(words::pr(s, w))),
            Content::Compressed(x) => Ok(self.norm_slp(slp::pr(s, x)?)),
        }
    }

}

fn content_eq(a: &Content, b: &Content) -> bool {
    match (a, b) {
        (Content::Plain(x), Content::Plain(y)) => x == y,
        _ => a.len() == b.len() && slp::equal(&a.to_slp(), &b.to_slp()),
    }
}

/// Iterates `pr(σ^k, y)` for `k ≥ offset` that together cover every
/// iterate, largest index first. Each item carries a flag marking a
/// candidate equal to `y` itself at `k = offset = 1`.
struct Candidates {
    ready: Vec<(BigUint, Content)>,
    /// Remaining indices `k` of `u^k · X/v^k`, produced from `next_k` down.
    lazy: Option<(Slp, Word, Word, u64)>,
    done_lazy: bool,
    offset: BigUint,
    y: Content,
}

impl Candidates {
    fn new(repr: &Repr, s: &[Action], y: &Content, offset: u32) -> Result<Self, SolverError> {
        let x = if offset == 0 { y.clone() } else { repr.pr(s, y)? };
        let mut ready = Vec::new();
        let mut lazy = None;
        match &x {
            Content::Plain(w) if repr.backend != Backend::Slp => {
                let mut elems = acceleration::pre_star_basis(s, w).elems;
                elems.sort_by_key(|e| e.1);
                ready = elems.into_iter().map(|(z, i)| (big(i), repr.norm_plain(z))).collect();
            }
            _ => {
                let xs = x.to_slp();
                let (first, last) = slp_phase_b(s, &xs)?;
                if let Some(last) = last {
                    lazy = Some((xs, rea(s), wri(s), last));
                }
                // Popped from the back, so the phase-B value goes last.
                ready.extend(first.map(|(k, z)| (k, repr.norm_slp(z))));
            }
        }
        Ok(Candidates { ready, lazy, done_lazy: false, offset: BigUint::from(offset), y: y.clone() })
    }

    fn size_hint(&self) -> u64 {
        self.ready.len() as u64 + self.lazy.as_ref().map_or(0, |l| l.3 + 1)
    }

    fn next(&mut self, repr: &Repr) -> Result<Option<(BigUint, Content, bool)>, SolverError> {
        let item = if let Some(it) = self.ready.pop() {
            Some(it)
        } else {
            let mut found = None;
            while let (Some((x, u, v, k)), false) = (&mut self.lazy, self.done_lazy) {
                let kb = BigUint::from(*k);
                // An iterate equal to its predecessor is the predecessor
                // with a larger index, which is produced next.
                let repeat = *k > 0 && {
                    let n = slp::residual_power_len(x, v, &kb) + *k * u.len() as u64;
                    let pb = BigUint::from(*k - 1);
                    let n1 = slp::residual_power_len(x, v, &pb) + (*k - 1) * u.len() as u64;
                    n == n1
                        && slp::equal(
                            &slp::power_times_residual(x, u, v, &kb)?,
                            &slp::power_times_residual(x, u, v, &pb)?,
                        )
                };
                let z = if repeat { None } else { Some(slp::power_times_residual(x, u, v, &kb)?) };
                if *k == 0 {
                    self.done_lazy = true;
                } else {
                    *k -= 1;
                }
                if let Some(z) = z {
                    found = Some((kb, repr.norm_slp(z)));
                    break;
                }
            }
            found
        };
        Ok(item.map(|(k, c)| {
            let k = k + &self.offset;
            let same = self.offset.is_one() && k.is_one() && content_eq(&c, &self.y);
            (k, c, same)
        }))
    }
}

/// The pure-power iterate (when it differs from the others) and the last
/// index of the `u^k · X/v^k` range, if any.
#[allow(clippy::type_complexity)]
fn slp_phase_b(s: &[Action], x: &Slp) -> Result<(Option<(BigUint, Slp)>, Option<u64>), SolverError> {
    let u = rea(s);
    let v = wri(s);
    if u.is_empty() {
        let k = match slp::kappa(x, &v) {
            Kappa::Finite(kp) => BigUint::from((kp + 1) as u64),
            Kappa::Infinite { stable_at } => big(stable_at),
        };
        let z = slp::residual_power(x, &v, &k);
        return Ok((Some((k, z)), None));
    }
    match slp::kappa(x, &v) {
        Kappa::Infinite { stable_at } => Ok((None, Some(stable_at as u64))),
        Kappa::Finite(kp) => {
            let f = PowerMap::new(s);
            let start = BigUint::from((kp + 1) as u64);
            let q0 = if kp < 0 {
                BigUint::zero()
            } else {
                BigUint::from(slp::pr_iter(s, x, &start)?.len())
            };
            let first = if f.apply(&q0) < q0 {
                let (steps, lim) = f.limit(&q0);
                Some((start + steps, Slp::power(&u, &lim)?))
            } else {
                let z = Slp::power(&u, &q0)?;
                // Equal to the last `u^k · X/v^k`, which has the smaller index.
                let dup = kp >= 0 && {
                    let prev = slp::power_times_residual(x, &u, &v, &BigUint::from(kp as u64))?;
                    prev.len() == z.len() && slp::equal(&prev, &z)
                };
                (!dup).then_some((start, z))
            };
            Ok((first, (kp >= 0).then_some(kp as u64)))
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Mode {
    Full,
    /// Only test the source here (used for a loop iteration that leaves the
    /// content unchanged).
    CheckOnly,
    /// Do not accept the source here (the target itself in exact
    /// reachability, where the empty run is handled separately).
    SkipCheck,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Key {
    Enter(LocationId),
    Arc(LocationId, Option<LocationId>),
}

/// Longest failed target kept in the memo.
const MEMO_WORD_LIMIT: u64 = 4096;

pub struct Search<'a, 'm> {
    solver: &'a Solver<'m>,
    src: (LocationId, Word),
    repr: Repr,
    bounds: CountBounds,
    order: OrderBounds,
    incoming: Vec<Vec<usize>>,
    failed: HashMap<Key, Vec<Word>>,
    stats: Stats,
}

type Found = Option<Vec<Segment>>;

impl<'a, 'm> Search<'a, 'm> {
    pub fn new(solver: &'a Solver<'m>, src: &(LocationId, Word)) -> Self {
        let m = solver.machine;
        let mut incoming = vec![Vec::new(); m.locations.len()];
        for (rid, r) in m.rules.iter().enumerate() {
            incoming[r.to].push(rid);
        }
        let bounds = CountBounds::compute(m, &solver.info, src.0, &src.1);
        let order = OrderBounds::compute(m, &bounds, src.0, &src.1);
        Search {
            solver,
            src: src.clone(),
            repr: Repr { backend: solver.options.backend, threshold: solver.options.plain_threshold },
            bounds,
            order,
            incoming,
            failed: HashMap::new(),
            stats: Stats::default(),
        }
    }

    /// Search for a run from the source to `↑tgt` (`exact` asks for at least
    /// one step unless source and target coincide).
    pub fn run(mut self, tgt: &(LocationId, Word), exact: bool) -> Result<(Found, Stats), SolverError> {
        let (t, ref y) = *tgt;
        let yc = self.repr.norm_plain(y.clone());
        if exact && self.src == *tgt {
            let seg = Segment { location: t, content: Slp::from_plain(y), exponent: BigUint::zero(), rule: None };
            return Ok((Some(vec![seg]), self.stats));
        }
        let found = if !exact {
            self.enter(t, yc)?
        } else {
            self.reach_root(t, yc)?
        };
        Ok((found, self.stats))
    }

    fn reach_root(&mut self, t: LocationId, y: Content) -> Result<Found, SolverError> {
        let info = &self.solver.info;
        if info.on_cycle(t) {
            let sigma = info.cycles[t].clone();
            let mut cands = Candidates::new(&self.repr, &sigma, &y, 1)?;
            while let Some((k, z, same)) = cands.next(&self.repr)? {
                self.stats.candidates += 1;
                let mode = if same { Mode::CheckOnly } else { Mode::Full };
                if let Some(p) = self.arc(t, Some(t), z, k, mode)? {
                    return Ok(Some(p));
                }
            }
            self.arc(t, Some(t), y, BigUint::zero(), Mode::SkipCheck)
        } else {
            self.arc(t, None, y, BigUint::zero(), Mode::SkipCheck)
        }
    }

    fn admits(&mut self, p: LocationId, y: &Content) -> bool {
        let mut ok = self.bounds.admits(p, &y.counts(self.solver.machine.alphabet.len()));
        if ok && self.order.active() {
            if let Content::Plain(w) = y {
                ok = self.order.admits(p, w);
            }
        }
        if !ok {
            self.stats.pruned += 1;
        }
        ok
    }

    fn known_failure(&mut self, key: Key, y: &Content) -> bool {
        let hit = self.failed.get(&key).is_some_and(|fs| fs.iter().any(|f| y.above(f)));
        if hit {
            self.stats.memo_hits += 1;
        }
        hit
    }

    fn record_failure(&mut self, key: Key, y: &Content) {
        let w = match y {
            Content::Plain(w) => w.clone(),
            Content::Compressed(s) if s.len() <= MEMO_WORD_LIMIT => s.expand(MEMO_WORD_LIMIT).expect("short"),
            Content::Compressed(_) => return,
        };
        let list = self.failed.entry(key).or_default();
        list.retain(|f| !words::is_subword(&w, f));
        list.push(w);
    }

    fn enter(&mut self, p: LocationId, y: Content) -> Result<Found, SolverError> {
        self.stats.states += 1;
        if !self.admits(p, &y) {
            return Ok(None);
        }
        let key = Key::Enter(p);
        if self.known_failure(key, &y) {
            return Ok(None);
        }
        let info = &self.solver.info;
        let found = if info.on_cycle(p) {
            let sigma = info.cycles[p].clone();
            let mut cands = Candidates::new(&self.repr, &sigma, &y, 0)?;
            self.stats.largest_basis = self.stats.largest_basis.max(cands.size_hint());
            let mut found = None;
            while let Some((k, z, _)) = cands.next(&self.repr)? {
                self.stats.candidates += 1;
                if let Some(path) = self.arc(p, Some(p), z, k, Mode::Full)? {
                    found = Some(path);
                    break;
                }
            }
            found
        } else {
            self.arc(p, None, y.clone(), BigUint::zero(), Mode::Full)?
        };
        if found.is_none() {
            self.record_failure(key, &y);
        }
        Ok(found)
    }

    fn arc(
        &mut self,
        p: LocationId,
        exit: Option<LocationId>,
        y: Content,
        k: BigUint,
        mode: Mode,
    ) -> Result<Found, SolverError> {
        self.stats.states += 1;
        if !self.admits(p, &y) {
            return Ok(None);
        }
        let here = |y: &Content| Segment { location: p, content: y.to_slp(), exponent: k.clone(), rule: None };
        if mode != Mode::SkipCheck && p == self.src.0 && y.below(&self.src.1) {
            return Ok(Some(vec![here(&y)]));
        }
        if mode == Mode::CheckOnly {
            return Ok(None);
        }
        let key = Key::Arc(p, exit);
        let memo = mode == Mode::Full;
        if memo && self.known_failure(key, &y) {
            return Ok(None);
        }
        let info = &self.solver.info;
        let m = self.solver.machine;
        for idx in 0..self.incoming[p].len() {
            let rid = self.incoming[p][idx];
            let r = &m.rules[rid];
            let internal = info.same_cycle(r.from, p) && info.cycle_rules[r.from].first() == Some(&rid);
            if internal && Some(r.from) == exit {
                continue;
            }
            let y2 = self.repr.pr(&r.actions, &y)?;
            let sub = if internal {
                self.arc(r.from, exit, y2, BigUint::zero(), Mode::Full)?
            } else {
                self.enter(r.from, y2)?
            };
            if let Some(mut path) = sub {
                path.last_mut().expect("nonempty path").rule = Some(rid);
                path.push(here(&y));
                return Ok(Some(path));
            }
        }
        if memo {
            self.record_failure(key, &y);
        }
        Ok(None)
    }
}

//! Forward over-approximation of letter counts, used to discard backward
//! search states that no run from the source can produce.
//!
//! For a letter set S, a rule changes the number of S-letters in the channel
//! by at most `|wri|_S − |rea|_S`, and cannot fire unless the channel holds
//! enough S-letters for its reads. Upper bounds are propagated through the
//! component DAG; a cycle that can still raise its bound after the values
//! have settled gets an unbounded count.

use std::collections::HashSet;

use crate::machine::{Action, Dir, FlatnessInfo, LocationId, Machine};
use crate::words::{is_subword, ominus, Letter, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Unreachable,
    At(u64),
    Unbounded,
}

struct RuleEffect {
    delta: i64,
    need: u64,
}

fn effect(actions: &[Action], member: &[bool]) -> RuleEffect {
    let mut bal: i64 = 0;
    let mut need: i64 = 0;
    for a in actions {
        for &c in &a.payload {
            if !member[c as usize] {
                continue;
            }
            match a.dir {
                Dir::Write => bal += 1,
                Dir::Read => {
                    bal -= 1;
                    need = need.max(-bal);
                }
            }
        }
    }
    RuleEffect { delta: bal, need: need as u64 }
}

fn apply(b: Bound, e: &RuleEffect) -> Bound {
    match b {
        Bound::Unreachable => Bound::Unreachable,
        Bound::Unbounded => Bound::Unbounded,
        Bound::At(n) if n < e.need => Bound::Unreachable,
        Bound::At(n) => Bound::At((n as i64 + e.delta) as u64),
    }
}

pub struct CountBounds {
    /// Membership vector of each letter set.
    sets: Vec<Vec<bool>>,
    /// `bounds[set][location]`.
    bounds: Vec<Vec<Bound>>,
}

impl CountBounds {
    pub fn compute(m: &Machine, info: &FlatnessInfo, src: LocationId, word: &[Letter]) -> Self {
        let k = m.alphabet.len();
        let mut sets: Vec<Vec<bool>> = vec![vec![true; k]];
        for c in 0..k {
            let mut only = vec![false; k];
            only[c] = true;
            sets.push(only);
            if k > 2 {
                let mut but = vec![true; k];
                but[c] = false;
                sets.push(but);
            }
        }
        let bounds = sets.iter().map(|s| Self::for_set(m, info, src, word, s)).collect();
        CountBounds { sets, bounds }
    }

    fn for_set(m: &Machine, info: &FlatnessInfo, src: LocationId, word: &[Letter], member: &[bool]) -> Vec<Bound> {
        let n = m.locations.len();
        let effects: Vec<RuleEffect> = m.rules.iter().map(|r| effect(&r.actions, member)).collect();
        let mut b = vec![Bound::Unreachable; n];
        b[src] = Bound::At(word.iter().filter(|&&c| member[c as usize]).count() as u64);
        let ncomp = info.component.iter().map(|c| c + 1).max().unwrap_or(0);
        let mut members: Vec<Vec<LocationId>> = vec![Vec::new(); ncomp];
        for q in 0..n {
            members[info.component[q]].push(q);
        }
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (rid, r) in m.rules.iter().enumerate() {
            incoming[r.to].push(rid);
        }
        for locs in &members {
            for &q in locs {
                for &rid in &incoming[q] {
                    let r = &m.rules[rid];
                    if info.component[r.from] != info.component[q] {
                        b[q] = b[q].max(apply(b[r.from], &effects[rid]));
                    }
                }
            }
            let Some(c) = locs.first().and_then(|&q| info.cycle_of[q]) else { continue };
            let cycle = &info.cycle_list[c];
            let relax = |b: &mut Vec<Bound>| {
                let mut changed = false;
                for &rid in cycle {
                    let r = &m.rules[rid];
                    let nb = apply(b[r.from], &effects[rid]);
                    if nb > b[r.to] {
                        b[r.to] = nb;
                        changed = true;
                    }
                }
                changed
            };
            relax(&mut b);
            relax(&mut b);
            if relax(&mut b) {
                for &q in locs {
                    if b[q] != Bound::Unreachable {
                        b[q] = Bound::Unbounded;
                    }
                }
                // Propagate within the cycle once more so every location
                // reached from the pumped one is unbounded too.
                relax(&mut b);
            }
        }
        b
    }

    /// False when a channel holding at least `counts` letters (per letter)
    /// can never occur at `q`.
    pub fn admits(&self, q: LocationId, counts: &[u64]) -> bool {
        for (set, bounds) in self.sets.iter().zip(&self.bounds) {
            let need: u64 = counts.iter().zip(set).filter(|(_, &m)| m).map(|(c, _)| *c).sum();
            match bounds[q] {
                Bound::Unreachable => return false,
                Bound::At(n) if need > n => return false,
                _ => {}
            }
        }
        true
    }

    pub fn reachable(&self, q: LocationId) -> bool {
        self.bounds[0][q] != Bound::Unreachable
    }
}

impl CountBounds {
    /// Largest count of letter `c` over all locations.
    pub fn max_count(&self, c: Letter) -> Bound {
        let k = self.sets[0].len();
        let idx = if k > 2 { 1 + 2 * c as usize } else { 1 + c as usize };
        self.bounds[idx].iter().copied().max().unwrap_or(Bound::Unreachable)
    }
}

/// Forward over-approximation of channel contents projected onto a subset
/// of the letters. Projections are explored with the largest-successor
/// semantics (writes append, reads consume through the first embedding),
/// keeping the ⊑-maximal ones per location. A content whose projection lies
/// below none of them cannot occur. The full alphabet is tried first, then
/// the letters with bounded counts, then those occurring at most once.
pub struct OrderBounds {
    keep: Vec<bool>,
    /// `None` when every exploration was abandoned.
    maximal: Option<Vec<Vec<Word>>>,
}

/// Projected configurations explored per attempt.
const ORDER_STATE_LIMIT: usize = 10_000;
/// Longest projected content before an attempt is abandoned.
const ORDER_LENGTH_LIMIT: usize = 128;

impl OrderBounds {
    pub fn compute(m: &Machine, counts: &CountBounds, src: LocationId, word: &[Letter]) -> Self {
        let k = m.alphabet.len();
        let attempts: [Vec<bool>; 3] = [
            vec![true; k],
            (0..k).map(|c| counts.max_count(c as Letter) != Bound::Unbounded).collect(),
            (0..k).map(|c| counts.max_count(c as Letter) <= Bound::At(1)).collect(),
        ];
        let mut tried: Vec<&Vec<bool>> = Vec::new();
        for keep in &attempts {
            if !keep.iter().any(|&b| b) || tried.contains(&keep) {
                continue;
            }
            tried.push(keep);
            let r = Self::explore(m, keep, src, word);
            if let Some(maximal) = r {
                return OrderBounds { keep: keep.clone(), maximal: Some(maximal) };
            }
        }
        OrderBounds { keep: vec![false; k], maximal: None }
    }

    fn explore(m: &Machine, keep: &[bool], src: LocationId, word: &[Letter]) -> Option<Vec<Vec<Word>>> {
        let project = |w: &[Letter]| -> Word { w.iter().copied().filter(|&c| keep[c as usize]).collect() };
        let rules: Vec<(LocationId, Vec<Action>, LocationId)> = m
            .rules
            .iter()
            .map(|r| {
                let acts = r
                    .actions
                    .iter()
                    .map(|a| Action { dir: a.dir, payload: project(&a.payload) })
                    .filter(|a| !a.payload.is_empty())
                    .collect();
                (r.from, acts, r.to)
            })
            .collect();
        let mut outgoing = vec![Vec::new(); m.locations.len()];
        for (i, r) in rules.iter().enumerate() {
            outgoing[r.0].push(i);
        }
        let mut maximal: Vec<Vec<Word>> = vec![Vec::new(); m.locations.len()];
        let mut seen: HashSet<(LocationId, Word)> = HashSet::new();
        let start = project(word);
        let mut work = vec![(src, start.clone())];
        seen.insert((src, start));
        while let Some((q, x)) = work.pop() {
            if seen.len() > ORDER_STATE_LIMIT {
                return None;
            }
            if maximal[q].iter().any(|w| is_subword(&x, w)) {
                continue;
            }
            maximal[q].retain(|w| !is_subword(w, &x));
            maximal[q].push(x.clone());
            'rules: for &ri in &outgoing[q] {
                let (_, acts, to) = &rules[ri];
                let mut y = x.clone();
                for a in acts {
                    match a.dir {
                        Dir::Write => y.extend_from_slice(&a.payload),
                        Dir::Read => match ominus(&y, &a.payload) {
                            Some(z) => y = z,
                            None => continue 'rules,
                        },
                    }
                }
                if y.len() > ORDER_LENGTH_LIMIT {
                    return None;
                }
                if !maximal[*to].iter().any(|w| is_subword(&y, w)) && seen.insert((*to, y.clone())) {
                    work.push((*to, y));
                }
            }
        }
        Some(maximal)
    }

    pub fn admits(&self, q: LocationId, y: &[Letter]) -> bool {
        let Some(maximal) = &self.maximal else { return true };
        let p: Word = y.iter().copied().filter(|&c| self.keep[c as usize]).collect();
        p.is_empty() || maximal[q].iter().any(|w| is_subword(&p, w))
    }

    pub fn active(&self) -> bool {
        self.maximal.is_some()
    }
}

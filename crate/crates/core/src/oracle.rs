//! Bounded forward exploration, used to cross-check the solver on small
//! instances.
//!
//! Two successor relations are available. `FullLossy` enumerates every
//! channel content reachable with arbitrary losses. `MaximalContent` keeps
//! only the largest successor of each rule: writes append, reads consume
//! with `⊖`. Every lossy successor is a subword of the maximal one, so the
//! maximal graph dominates all runs.
//!
//! Answers are `True` when a genuine run was found and `False` only when the
//! exploration closed without hitting a bound.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::machine::{ActionSeq, Dir, LocationId, Machine};
use crate::words::{self, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    FullLossy,
    MaximalContent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub channel_bound: usize,
    /// Maximum number of explored configurations.
    pub step_bound: usize,
    pub mode: Mode,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { channel_bound: 10, step_bound: 10_000, mode: Mode::MaximalContent }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    True,
    False,
    Inconclusive,
}

impl Answer {
    pub fn conclusive(self) -> Option<bool> {
        match self {
            Answer::True => Some(true),
            Answer::False => Some(false),
            Answer::Inconclusive => None,
        }
    }
}

pub type Config = (LocationId, Word);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleVerdict {
    pub answer: Answer,
    /// Configurations along a run justifying `True` (the maximal contents
    /// in `MaximalContent` mode).
    pub trace: Option<Vec<Config>>,
}

impl OracleVerdict {
    fn no(exhaustive: bool) -> Self {
        let answer = if exhaustive { Answer::False } else { Answer::Inconclusive };
        OracleVerdict { answer, trace: None }
    }
}

/// Explored part of the configuration graph.
#[derive(Clone, Debug)]
pub struct Exploration {
    pub nodes: Vec<Config>,
    /// BFS tree parent of each node.
    pub parent: Vec<Option<usize>>,
    pub succ: Vec<Vec<usize>>,
    /// No bound was hit: `nodes` is every reachable configuration.
    pub exhaustive: bool,
}

fn max_successor(x: &[u16], actions: &ActionSeq) -> Option<Word> {
    let mut y = x.to_vec();
    for a in actions {
        y = match a.dir {
            Dir::Write => {
                y.extend_from_slice(&a.payload);
                y
            }
            Dir::Read => words::ominus(&y, &a.payload)?,
        };
    }
    Some(y)
}

/// All lossy successors, or `None` when the enumeration is too large.
fn lossy_successors(x: &[u16], actions: &ActionSeq) -> Option<BTreeSet<Word>> {
    let mut cur: BTreeSet<Word> = words::subwords(x);
    for a in actions {
        let mut next = BTreeSet::new();
        for y in &cur {
            next.extend(words::lossy_step(y, a)?);
        }
        cur = next;
    }
    Some(cur)
}

/// Successor contents of `x` through one rule. The flag is false when
/// some successor was dropped for exceeding the bounds.
fn successors(x: &[u16], actions: &ActionSeq, cfg: &OracleConfig) -> (Vec<Word>, bool) {
    match cfg.mode {
        Mode::MaximalContent => match max_successor(x, actions) {
            Some(y) => (vec![y], true),
            None => (Vec::new(), true),
        },
        Mode::FullLossy => match lossy_successors(x, actions) {
            Some(ys) => (ys.into_iter().collect(), true),
            None => (Vec::new(), false),
        },
    }
}

/// Breadth-first exploration from `src`. Contents longer than the channel
/// bound are not stored; `on_edge` sees every generated successor (also the
/// dropped ones) and can stop the search by returning true.
fn explore_with(
    m: &Machine,
    src: &Config,
    cfg: &OracleConfig,
    mut on_edge: impl FnMut(usize, LocationId, &Word) -> bool,
) -> (Exploration, Option<usize>) {
    let mut ex = Exploration { nodes: vec![src.clone()], parent: vec![None], succ: vec![Vec::new()], exhaustive: true };
    let mut index: HashMap<Config, usize> = HashMap::from([(src.clone(), 0)]);
    let mut queue = VecDeque::from([0usize]);
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); m.locations.len()];
    for (rid, r) in m.rules.iter().enumerate() {
        out[r.from].push(rid);
    }
    while let Some(i) = queue.pop_front() {
        let (q, x) = ex.nodes[i].clone();
        for &rid in &out[q] {
            let r = &m.rules[rid];
            let (ys, complete) = successors(&x, &r.actions, cfg);
            if !complete {
                ex.exhaustive = false;
            }
            for y in ys {
                if on_edge(i, r.to, &y) {
                    return (ex, Some(i));
                }
                if y.len() > cfg.channel_bound {
                    ex.exhaustive = false;
                    continue;
                }
                let key = (r.to, y);
                let j = match index.get(&key) {
                    Some(&j) => j,
                    None => {
                        if ex.nodes.len() >= cfg.step_bound {
                            ex.exhaustive = false;
                            continue;
                        }
                        let j = ex.nodes.len();
                        index.insert(key.clone(), j);
                        ex.nodes.push(key);
                        ex.parent.push(Some(i));
                        ex.succ.push(Vec::new());
                        queue.push_back(j);
                        j
                    }
                };
                if !ex.succ[i].contains(&j) {
                    ex.succ[i].push(j);
                }
            }
        }
    }
    (ex, None)
}

pub fn oracle_explore(m: &Machine, src: &Config, cfg: &OracleConfig) -> Exploration {
    explore_with(m, src, cfg, |_, _, _| false).0
}

fn path_to(ex: &Exploration, mut i: usize) -> Vec<Config> {
    let mut out = vec![ex.nodes[i].clone()];
    while let Some(p) = ex.parent[i] {
        out.push(ex.nodes[p].clone());
        i = p;
    }
    out.reverse();
    out
}

/// Is `(t, y')` with `y ⊑ y'` reachable? With `at_least_one_step`, the
/// configuration must be entered by a rule.
fn cover(m: &Machine, src: &Config, tgt: &Config, cfg: &OracleConfig, at_least_one_step: bool) -> OracleVerdict {
    let (t, y) = tgt;
    if !at_least_one_step && src.0 == *t && words::is_subword(y, &src.1) {
        return OracleVerdict { answer: Answer::True, trace: Some(vec![src.clone()]) };
    }
    let mut hit: Option<(LocationId, Word)> = None;
    let (ex, found) = explore_with(m, src, cfg, |_, q, z| {
        let ok = q == *t && words::is_subword(y, z);
        if ok {
            hit = Some((q, z.clone()));
        }
        ok
    });
    match found {
        Some(i) => {
            let mut trace = path_to(&ex, i);
            trace.push(hit.expect("set with found"));
            OracleVerdict { answer: Answer::True, trace: Some(trace) }
        }
        None => OracleVerdict::no(ex.exhaustive),
    }
}

pub fn oracle_coverability(m: &Machine, src: &Config, tgt: &Config, cfg: &OracleConfig) -> OracleVerdict {
    cover(m, src, tgt, cfg, false)
}

/// Exact reachability: equal configurations, or covering the target in at
/// least one step (the last step may drop the excess).
pub fn oracle_reach_exact(m: &Machine, src: &Config, tgt: &Config, cfg: &OracleConfig) -> OracleVerdict {
    if src == tgt {
        return OracleVerdict { answer: Answer::True, trace: Some(vec![src.clone()]) };
    }
    cover(m, src, tgt, cfg, true)
}

/// Strongly connected components (iterative Kosaraju). Returns the
/// component id of each node and whether the component contains an edge.
fn sccs(succ: &[Vec<usize>]) -> (Vec<usize>, Vec<bool>) {
    let n = succ.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((v, k)) = stack.pop() {
            if k < succ[v].len() {
                stack.push((v, k + 1));
                let w = succ[v][k];
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    let mut pred = vec![Vec::new(); n];
    for (v, ws) in succ.iter().enumerate() {
        for &w in ws {
            pred[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut c = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = c;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &pred[v] {
                if comp[w] == usize::MAX {
                    comp[w] = c;
                    stack.push(w);
                }
            }
        }
        c += 1;
    }
    let mut cyclic = vec![false; c];
    for (v, ws) in succ.iter().enumerate() {
        for &w in ws {
            if comp[v] == comp[w] {
                cyclic[comp[v]] = true;
            }
        }
    }
    (comp, cyclic)
}

/// Infinite-run search. `keep(i)` restricts the graph; `good(i)` marks
/// the nodes that must recur.
fn lasso(
    ex: &Exploration,
    cfg: &OracleConfig,
    keep: impl Fn(usize) -> bool,
    good: impl Fn(usize) -> bool,
) -> OracleVerdict {
    // A cycle of equal configurations, in either mode.
    let succ: Vec<Vec<usize>> = (0..ex.nodes.len())
        .map(|i| if keep(i) { ex.succ[i].iter().copied().filter(|&j| keep(j)).collect() } else { Vec::new() })
        .collect();
    let (comp, cyclic) = sccs(&succ);
    if let Some(i) = (0..ex.nodes.len()).find(|&i| keep(i) && good(i) && cyclic[comp[i]]) {
        return OracleVerdict { answer: Answer::True, trace: Some(path_to(ex, i)) };
    }
    // In the maximal graph, a tree path from (q, z) to (q, z') with z ⊑ z'
    // repeats forever by monotonicity.
    if cfg.mode == Mode::MaximalContent {
        for i in 0..ex.nodes.len() {
            if !keep(i) {
                continue;
            }
            let (q, z) = &ex.nodes[i];
            let mut saw_good = good(i);
            let mut a = ex.parent[i];
            while let Some(p) = a {
                if !keep(p) {
                    break;
                }
                saw_good |= good(p);
                let (qp, zp) = &ex.nodes[p];
                if qp == q && words::is_subword(zp, z) && saw_good {
                    return OracleVerdict { answer: Answer::True, trace: Some(path_to(ex, i)) };
                }
                a = ex.parent[p];
            }
        }
    }
    OracleVerdict::no(ex.exhaustive)
}

pub fn oracle_nonterm(m: &Machine, src: &Config, cfg: &OracleConfig) -> OracleVerdict {
    let ex = oracle_explore(m, src, cfg);
    lasso(&ex, cfg, |_| true, |_| true)
}

pub fn oracle_buchi(m: &Machine, src: &Config, fair: &[LocationId], cfg: &OracleConfig) -> OracleVerdict {
    let ex = oracle_explore(m, src, cfg);
    lasso(&ex, cfg, |_| true, |i| fair.contains(&ex.nodes[i].0))
}

/// Infinite run visiting `q'` infinitely often, with `⊒ x` in the channel
/// at every visit from some point on.
pub fn oracle_repcov(m: &Machine, src: &Config, tgt: &Config, cfg: &OracleConfig) -> OracleVerdict {
    let ex = oracle_explore(m, src, cfg);
    let (t, x) = tgt;
    let ok = |i: usize| {
        let (q, z) = &ex.nodes[i];
        *q != *t || words::is_subword(x, z)
    };
    lasso(&ex, cfg, ok, |i| ex.nodes[i].0 == *t)
}

/// Rounds of strict growth required before calling a lasso unbounded.
const GROWTH_ROUNDS: usize = 8;

/// Unboundedness. `False` needs a closed exploration (finitely many
/// reachable configurations). `True` is reported for a tree path from
/// `(q, z)` to `(q, z')` with `z ⊏ z'` whose replay keeps growing strictly
/// for several rounds past the channel bound. The replay only uses maximal
/// contents, so this is a bounded proxy rather than a proof.
pub fn oracle_unbounded(m: &Machine, src: &Config, cfg: &OracleConfig) -> OracleVerdict {
    let cfg_max = OracleConfig { mode: Mode::MaximalContent, ..*cfg };
    let ex = oracle_explore(m, src, &cfg_max);
    if ex.exhaustive {
        return OracleVerdict { answer: Answer::False, trace: None };
    }
    let mut rules_into: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, p) in ex.parent.iter().enumerate() {
        let Some(p) = *p else { continue };
        let (q, _) = &ex.nodes[p];
        let (q2, z2) = &ex.nodes[i];
        let r = m.rules.iter().position(|r| r.from == *q && r.to == *q2 && max_successor(&ex.nodes[p].1, &r.actions).as_ref() == Some(z2));
        if let Some(r) = r {
            rules_into.insert((p, i), r);
        }
    }
    for i in 0..ex.nodes.len() {
        let (q, z) = &ex.nodes[i];
        let mut path = Vec::new();
        let mut cur = i;
        while let Some(p) = ex.parent[cur] {
            let Some(&r) = rules_into.get(&(p, cur)) else { break };
            path.push(r);
            cur = p;
            let (qp, zp) = &ex.nodes[p];
            if qp == q && zp.len() < z.len() && words::is_subword(zp, z) {
                let loop_rules: Vec<usize> = path.iter().rev().copied().collect();
                if replay_grows(m, &loop_rules, z, cfg.channel_bound) {
                    return OracleVerdict { answer: Answer::True, trace: Some(path_to(&ex, i)) };
                }
            }
        }
    }
    OracleVerdict { answer: Answer::Inconclusive, trace: None }
}

fn replay_grows(m: &Machine, rules: &[usize], z: &[u16], bound: usize) -> bool {
    let mut cur = z.to_vec();
    let mut rounds_past = 0;
    for _ in 0..4 * bound + 4 * GROWTH_ROUNDS {
        let mut next = cur.clone();
        for &r in rules {
            match max_successor(&next, &m.rules[r].actions) {
                Some(y) => next = y,
                None => return false,
            }
        }
        if next.len() <= cur.len() || !words::is_subword(&cur, &next) {
            return false;
        }
        cur = next;
        if cur.len() > bound {
            rounds_past += 1;
            if rounds_past >= GROWTH_ROUNDS {
                return true;
            }
        }
    }
    false
}

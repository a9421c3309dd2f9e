//! Instance generators: the doubling/halving family, two SAT reductions,
//! DIMACS input, and seeded random flat machines.
//!
//! Generators emit the machine text format and parse it back, so every
//! generated machine also exercises the parser.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::machine::{parse_machine, Machine};
use crate::solver::{Query, QueryKind};

struct Text {
    out: String,
    locs: Vec<String>,
    rules: usize,
}

impl Text {
    fn new(name: &str, alphabet: &[String]) -> Self {
        let mut out = String::new();
        writeln!(out, "machine {name}").unwrap();
        writeln!(out, "alphabet {}", alphabet.join(" ")).unwrap();
        Text { out, locs: Vec::new(), rules: 0 }
    }

    fn loc(&mut self, name: impl Into<String>) -> String {
        let name = name.into();
        self.locs.push(name.clone());
        name
    }

    fn rule(&mut self, from: &str, to: &str, actions: &str) {
        let actions = if actions.is_empty() { "." } else { actions };
        writeln!(self.out, "rule r{} : {from} -> {to} : {actions}", self.rules).unwrap();
        self.rules += 1;
    }

    fn finish(self, init: &str) -> Machine {
        let locs: Vec<String> =
            self.locs.iter().map(|l| if l == init { format!("{l} init") } else { l.clone() }).collect();
        let text = format!("{}loc {}\n", self.out, locs.join(" "));
        parse_machine(&text).expect("generated machine parses")
    }
}

fn config(m: &Machine, loc: &str) -> (usize, Vec<u16>) {
    (m.location(loc).expect("generated location"), Vec::new())
}

/// The machine where reaching `q'0` from `q0` with an empty channel forces
/// the content `b a^{2^n}` at `q_n`: doubling loops `?a !aa` on `q1..qn`,
/// halving loops `?aa !a` on `q'n..q'1`.
pub fn gen_fig1(n: usize) -> (Machine, Query) {
    assert!(n >= 1, "gen_fig1 needs n >= 1");
    let mut t = Text::new(&format!("fig1_n{n}"), &["a".into(), "b".into()]);
    let q0 = t.loc("q0");
    let up: Vec<String> = (1..=n).map(|i| t.loc(format!("q{i}"))).collect();
    let down: Vec<String> = (1..=n).rev().map(|i| t.loc(format!("q'{i}"))).collect();
    let end = t.loc("q'0");
    t.rule(&q0, &up[0], "!ab");
    for (i, q) in up.iter().enumerate() {
        t.rule(q, q, "?a !aa");
        let next = up.get(i + 1).unwrap_or(&down[0]);
        t.rule(q, next, "?b !b");
    }
    for (i, q) in down.iter().enumerate() {
        t.rule(q, q, "?aa !a");
        match down.get(i + 1) {
            Some(next) => t.rule(q, next, "?b !b"),
            None => t.rule(q, &end, "?ba"),
        }
    }
    let m = t.finish(&q0);
    let q = Query::reach(config(&m, "q0"), config(&m, "q'0"));
    (m, q)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    /// Signed 1-based literals, at most three per clause.
    pub clauses: Vec<Vec<i32>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("line {0}: missing or malformed `p cnf` header")]
    Header(usize),
    #[error("line {line}: malformed literal `{token}`")]
    Literal { line: usize, token: String },
    #[error("line {line}: literal {lit} outside 1..={num_vars}")]
    Range { line: usize, lit: i32, num_vars: usize },
    #[error("line {0}: clause is not terminated by 0")]
    Unterminated(usize),
    #[error("line {0}: empty clause")]
    EmptyClause(usize),
    #[error("line {0}: clause has more than 3 literals (only 3CNF is supported)")]
    Oversize(usize),
    #[error("header announces {expected} clauses, found {found}")]
    Count { expected: usize, found: usize },
}

/// DIMACS CNF with one clause per line, each ending in `0`.
pub fn parse_dimacs(text: &str) -> Result<Cnf, DimacsError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["p", "cnf", v, c] if header.is_none() => {
                    let v = v.parse().map_err(|_| DimacsError::Header(line_no))?;
                    let c = c.parse().map_err(|_| DimacsError::Header(line_no))?;
                    header = Some((v, c));
                }
                _ => return Err(DimacsError::Header(line_no)),
            }
            continue;
        }
        let (num_vars, _) = header.ok_or(DimacsError::Header(line_no))?;
        let mut lits = Vec::new();
        let mut closed = false;
        for tok in line.split_whitespace() {
            if closed {
                return Err(DimacsError::Literal { line: line_no, token: tok.to_string() });
            }
            let lit: i32 = tok.parse().map_err(|_| DimacsError::Literal { line: line_no, token: tok.to_string() })?;
            if lit == 0 {
                closed = true;
            } else if lit.unsigned_abs() as usize > num_vars {
                return Err(DimacsError::Range { line: line_no, lit, num_vars });
            } else {
                lits.push(lit);
            }
        }
        if !closed {
            return Err(DimacsError::Unterminated(line_no));
        }
        if lits.is_empty() {
            return Err(DimacsError::EmptyClause(line_no));
        }
        if lits.len() > 3 {
            return Err(DimacsError::Oversize(line_no));
        }
        clauses.push(lits);
    }
    let (num_vars, expected) = header.ok_or(DimacsError::Header(text.lines().count()))?;
    if expected != clauses.len() {
        return Err(DimacsError::Count { expected, found: clauses.len() });
    }
    Ok(Cnf { num_vars, clauses })
}

impl Cnf {
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                write!(out, "{l} ").unwrap();
            }
            out.push_str("0\n");
        }
        out
    }

    /// Brute force over all valuations.
    pub fn satisfiable(&self) -> bool {
        assert!(self.num_vars < 30, "brute force over too many variables");
        (0u32..1 << self.num_vars).any(|v| self.satisfied_by(v))
    }

    /// Bit `i` of `valuation` is the value of variable `i + 1`.
    pub fn satisfied_by(&self, valuation: u32) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let bit = valuation >> (l.unsigned_abs() - 1) & 1 == 1;
                bit == (l > 0)
            })
        })
    }
}

/// Random 3CNF with exactly three literals per clause over distinct
/// variables (fewer when there are fewer than three variables).
pub fn gen_random_cnf(seed: u64, num_vars: usize, num_clauses: usize) -> Cnf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars: Vec<i32> = (1..=num_vars as i32).collect();
    let clauses = (0..num_clauses)
        .map(|_| {
            vars.choose_multiple(&mut rng, 3.min(num_vars))
                .map(|&v| if rng.gen_bool(0.5) { v } else { -v })
                .collect()
        })
        .collect();
    Cnf { num_vars, clauses }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AcyclicSatOptions {
    /// Add the `!$` self-loop on the final location and ask for
    /// nontermination instead of reachability.
    pub liveness: bool,
    /// Keep the `$` end marker. Without it the alphabet is `{0, 1}` (plus
    /// `$` for the liveness loop) and the final no-loss line alone
    /// guarantees that the valuation survived intact.
    pub end_marker: bool,
}

impl Default for AcyclicSatOptions {
    fn default() -> Self {
        AcyclicSatOptions { liveness: false, end_marker: true }
    }
}

pub fn gen_acyclic_sat(c: &Cnf, liveness: bool) -> (Machine, Query) {
    gen_acyclic_sat_with(c, AcyclicSatOptions { liveness, ..Default::default() })
}

/// Acyclic machine: write a valuation `w$`, then per clause read it back
/// along one of three literal lines (each forcing the literal's bit), and
/// finally read the valuation without writing, which only succeeds when
/// nothing was lost.
pub fn gen_acyclic_sat_with(c: &Cnf, opts: AcyclicSatOptions) -> (Machine, Query) {
    let n = c.num_vars;
    let mut alphabet = vec!["0".to_string(), "1".to_string()];
    if opts.end_marker || opts.liveness {
        alphabet.push("$".into());
    }
    let mut t = Text::new("acyclic_sat", &alphabet);

    let ib = t.loc("Ib");
    let mut prev = ib.clone();
    for i in 1..=n {
        let next = t.loc(format!("I{i}"));
        t.rule(&prev, &next, "!0");
        t.rule(&prev, &next, "!1");
        prev = next;
    }
    let ie = t.loc("Ie");
    t.rule(&prev, &ie, if opts.end_marker { "!$" } else { "" });

    let mut last = ie;
    for (j, clause) in c.clauses.iter().enumerate() {
        let cb = t.loc(format!("C{}b", j + 1));
        let ce = t.loc(format!("C{}e", j + 1));
        t.rule(&last, &cb, "");
        let mut start = cb.clone();
        let mut ends = Vec::new();
        for (k, &lit) in clause.iter().enumerate() {
            let line_start = if k == 0 {
                cb.clone()
            } else {
                let s = t.loc(format!("C{}l{}_0", j + 1, k + 1));
                t.rule(&start, &s, "");
                s
            };
            start = line_start.clone();
            let mut p = line_start;
            for i in 1..=n {
                let q = t.loc(format!("C{}l{}_{i}", j + 1, k + 1));
                if lit.unsigned_abs() as usize == i {
                    t.rule(&p, &q, if lit > 0 { "?1 !1" } else { "?0 !0" });
                } else {
                    t.rule(&p, &q, "?0 !0");
                    t.rule(&p, &q, "?1 !1");
                }
                p = q;
            }
            let e = if k == 0 {
                ce.clone()
            } else {
                t.loc(format!("C{}l{}_e", j + 1, k + 1))
            };
            if opts.end_marker {
                t.rule(&p, &e, "?$ !$");
            } else {
                t.rule(&p, &e, "");
            }
            ends.push(e);
        }
        // Later lines join the first line's end through chained ε rules.
        for k in (1..ends.len()).rev() {
            let to = ends[k - 1].clone();
            t.rule(&ends[k], &to, "");
        }
        last = ce;
    }

    let vb = t.loc("Vb");
    t.rule(&last, &vb, "");
    let mut p = vb;
    for i in 1..=n {
        let q = t.loc(format!("V{i}"));
        t.rule(&p, &q, "?0");
        t.rule(&p, &q, "?1");
        p = q;
    }
    let ve = t.loc("Ve");
    t.rule(&p, &ve, if opts.end_marker { "?$" } else { "" });
    if opts.liveness {
        t.rule(&ve, &ve, "!$");
    }
    let m = t.finish(&ib);
    let src = config(&m, "Ib");
    let q = if opts.liveness {
        Query { kind: QueryKind::Nonterm, source: src, target: None, fair_set: Vec::new() }
    } else {
        Query::reach(src, config(&m, "Ve"))
    };
    (m, q)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SinglePathOptions {
    /// Two copies of the alphabet: every line reads one colour and writes
    /// the other, so no read/write-back loop can spin forever.
    pub colours: bool,
    /// Add a `!$` self-loop on `f` and ask for nontermination.
    pub liveness: bool,
}

pub fn gen_singlepath_sat(c: &Cnf) -> (Machine, Query) {
    gen_singlepath_sat_with(c, SinglePathOptions::default())
}

struct Line<'a> {
    t: &'a mut Text,
    cur: String,
    count: usize,
    prefix: String,
}

impl Line<'_> {
    fn next(&mut self, actions: &str) {
        self.count += 1;
        let q = self.t.loc(format!("{}_{}", self.prefix, self.count));
        let from = std::mem::replace(&mut self.cur, q.clone());
        self.t.rule(&from, &q, actions);
    }

    fn looped(&mut self, actions: &str) {
        let q = self.cur.clone();
        self.t.rule(&q, &q, actions);
    }
}

/// Single-path machine with self-loops only: choose a valuation over the
/// marked encoding `v1 b1 … vn bn`, then per clause tag the satisfying
/// literals with `x`, move a tag to the front with `2n` swap lines, and
/// consume it. A final line drains the valuation before `f`.
pub fn gen_singlepath_sat_with(c: &Cnf, opts: SinglePathOptions) -> (Machine, Query) {
    let n = c.num_vars;
    let colour_names = |i: usize| if opts.colours && i % 2 == 1 { "'" } else { "" };
    let mut alphabet = Vec::new();
    for col in 0..if opts.colours { 2 } else { 1 } {
        let s = colour_names(col);
        for i in 1..=n {
            alphabet.push(format!("v{i}{s}"));
        }
        alphabet.extend(["0", "1", "x"].iter().map(|b| format!("{b}{s}")));
    }
    if opts.liveness {
        alphabet.push("$".into());
    }
    let mut t = Text::new("singlepath_sat", &alphabet);
    let start = t.loc("s");
    let mut line = Line { t: &mut t, cur: start.clone(), count: 0, prefix: "L".into() };
    // Colour of the letters currently in the channel.
    let mut col = 0usize;
    let l = |name: &str, c: usize| format!("{name}{}", colour_names(c));
    let v = |i: usize, c: usize| l(&format!("v{i}"), c);

    let init: Vec<String> = (1..=n).flat_map(|i| [v(i, 0), l("0", 0)]).collect();
    line.next(&format!("!{}", init.join(",")));

    // Valuation choice: each 0 may be rewritten as 1.
    {
        let (r, w) = (col, col ^ opts.colours as usize);
        for i in 1..=n {
            line.next(&format!("?{} !{}", v(i, r), v(i, w)));
            line.looped(&format!("?{} !{}", l("0", r), l("0", w)));
            line.next("");
            line.looped(&format!("?{} !{}", l("0", r), l("1", w)));
            line.next("");
        }
        col = w;
    }

    for clause in &c.clauses {
        let pos = |i: usize| clause.contains(&(i as i32));
        let neg = |i: usize| clause.contains(&-(i as i32));
        // Tag validated literals.
        let (r, w) = (col, col ^ opts.colours as usize);
        for i in 1..=n {
            line.next(&format!("?{} !{}", v(i, r), v(i, w)));
            let tag0 = if neg(i) { format!(",{}", l("x", w)) } else { String::new() };
            line.looped(&format!("?{} !{}{tag0}", l("0", r), l("0", w)));
            line.next("");
            let tag1 = if pos(i) { format!(",{}", l("x", w)) } else { String::new() };
            line.looped(&format!("?{} !{}{tag1}", l("1", r), l("1", w)));
            line.next("");
        }
        col = w;
        // Move a tag one position to the front per line.
        for _ in 0..2 * n {
            let (r, w) = (col, col ^ opts.colours as usize);
            line.next("");
            line.looped(&format!("?{} !{}", l("x", r), l("x", w)));
            for i in 1..=n {
                let syms = [v(i, r), l("0", r), l("1", r)];
                let outs = [v(i, w), l("0", w), l("1", w)];
                for (s, o) in syms.iter().zip(&outs) {
                    line.next("");
                    line.looped(&format!("?{s} !{o}"));
                    line.next("");
                    line.looped(&format!("?{s},{} !{},{o}", l("x", r), l("x", w)));
                }
            }
            col = w;
        }
        // The tag must be in front.
        let (r, w) = (col, col ^ opts.colours as usize);
        line.next(&format!("?{}", l("x", r)));
        for i in 1..=n {
            line.next(&format!("?{} !{}", v(i, r), v(i, w)));
            line.looped(&format!("?{} !{}", l("0", r), l("0", w)));
            line.next("");
            line.looped(&format!("?{} !{}", l("1", r), l("1", w)));
        }
        col = w;
    }

    // Drain the valuation.
    for i in 1..=n {
        line.next(&format!("?{}", v(i, col)));
        line.looped(&format!("?{}", l("0", col)));
        line.next("");
        line.looped(&format!("?{}", l("1", col)));
    }
    let last = line.cur.clone();
    let f = t.loc("f");
    t.rule(&last, &f, "");
    if opts.liveness {
        t.rule(&f, &f, "!$");
    }
    let m = t.finish(&start);
    let src = config(&m, "s");
    let q = if opts.liveness {
        Query { kind: QueryKind::Nonterm, source: src, target: None, fair_set: Vec::new() }
    } else {
        Query::reach(src, config(&m, "f"))
    };
    (m, q)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomParams {
    pub locations: usize,
    pub letters: usize,
    /// Upper bound on the total number of rules.
    pub max_rules: usize,
    /// Upper bound on the number of actions per rule.
    pub max_actions: usize,
    /// Upper bound on the payload length of each action.
    pub max_payload: usize,
    /// Probability that a block of locations is closed into a cycle.
    pub cycle_prob: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams { locations: 6, letters: 3, max_rules: 8, max_actions: 2, max_payload: 2, cycle_prob: 0.5 }
    }
}

/// Seed-deterministic flat machine. Locations are split into consecutive
/// blocks; a block is either a single location, possibly with a self-loop,
/// or a simple cycle through all its locations. Remaining rules go forward
/// between distinct blocks, so every strongly connected component is a
/// single cycle.
pub fn gen_random_flat(seed: u64, p: &RandomParams) -> Machine {
    assert!(p.locations >= 1 && p.letters >= 1 && p.letters <= 26);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet: Vec<String> = (0..p.letters).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    let mut t = Text::new(&format!("random_{seed}"), &alphabet);
    let locs: Vec<String> = (0..p.locations).map(|i| t.loc(format!("p{i}"))).collect();

    let actions = |rng: &mut ChaCha8Rng| -> String {
        let k = rng.gen_range(0..=p.max_actions);
        let acts: Vec<String> = (0..k)
            .map(|_| {
                let dir = if rng.gen_bool(0.5) { '!' } else { '?' };
                let len = rng.gen_range(1..=p.max_payload.max(1));
                let w: String = (0..len).map(|_| alphabet[rng.gen_range(0..p.letters)].clone()).collect();
                format!("{dir}{w}")
            })
            .collect();
        acts.join(" ")
    };

    let mut block_of = vec![0usize; p.locations];
    let mut budget = p.max_rules;
    let mut i = 0;
    let mut block = 0;
    while i < p.locations {
        let len = rng.gen_range(1..=3.min(p.locations - i));
        block_of[i..i + len].fill(block);
        if budget >= len && rng.gen_bool(p.cycle_prob) {
            for k in 0..len {
                let a = actions(&mut rng);
                t.rule(&locs[i + k], &locs[i + (k + 1) % len], &a);
            }
            budget -= len;
        }
        i += len;
        block += 1;
    }
    if block_of[p.locations - 1] > 0 {
        let extra = rng.gen_range(p.locations / 2..=budget.max(p.locations / 2)).min(budget);
        for _ in 0..extra {
            let from = rng.gen_range(0..p.locations);
            let later: Vec<usize> = (0..p.locations).filter(|&q| block_of[q] > block_of[from]).collect();
            let Some(&to) = later.choose(&mut rng) else { continue };
            let a = actions(&mut rng);
            t.rule(&locs[from], &locs[to], &a);
        }
    }
    t.finish(&locs[0])
}

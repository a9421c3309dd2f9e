//! Straight-line programs: grammars with one production per nonterminal that
//! generate a single word. Channel contents of exponential length stay
//! polynomial in size.
//!
//! Productions are either a leaf (one letter) or a pair of strictly smaller
//! ids, and are hash-consed so equal pairs share one id. The empty word is a
//! dedicated axiom (`root == None`).
//!
//! Textual form, one production per line, children before parents:
//!
//! ```text
//! X0 -> a
//! X1 -> b
//! X2 -> X0 X1
//! axiom X2
//! ```
//!
//! `axiom eps` denotes the empty word.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::acceleration::{Kappa, PowerMap};
use crate::machine::{rea, wri, Action, Dir};
use crate::words::{Letter, Word};

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Prod {
    Leaf(Letter),
    Pair(NodeId, NodeId),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SlpError {
    #[error("expansion of length {len} exceeds limit {limit}")]
    ExpansionTooLarge { len: u64, limit: u64 },
    #[error("factor [{start}, {end}) out of range for length {len}")]
    IndexOutOfRange { start: u64, end: u64, len: u64 },
    #[error("word length overflows 64 bits")]
    Overflow,
    #[error("grammar line {line}: {msg}")]
    Grammar { line: usize, msg: String },
}

#[derive(Clone, Debug, Default)]
pub struct Slp {
    prods: Vec<Prod>,
    lens: Vec<u64>,
    index: HashMap<Prod, NodeId>,
    root: Option<NodeId>,
}

impl PartialEq for Slp {
    /// Structural equality of the reachable grammars after renumbering.
    fn eq(&self, other: &Self) -> bool {
        let a = self.compacted();
        let b = other.compacted();
        a.prods == b.prods && a.root == b.root
    }
}

impl Slp {
    pub fn empty() -> Self {
        Slp::default()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn prod(&self, id: NodeId) -> Prod {
        self.prods[id as usize]
    }

    pub fn node_len(&self, id: NodeId) -> u64 {
        self.lens[id as usize]
    }

    pub fn len(&self) -> u64 {
        self.root.map_or(0, |r| self.lens[r as usize])
    }

    /// Number of productions reachable from the axiom.
    pub fn size(&self) -> usize {
        self.reachable().iter().filter(|&&b| b).count()
    }

    fn reachable(&self) -> Vec<bool> {
        let mut mark = vec![false; self.prods.len()];
        if let Some(r) = self.root {
            mark[r as usize] = true;
        }
        for id in (0..self.prods.len()).rev() {
            if mark[id] {
                if let Prod::Pair(l, r) = self.prods[id] {
                    mark[l as usize] = true;
                    mark[r as usize] = true;
                }
            }
        }
        mark
    }

    fn intern(&mut self, p: Prod, len: u64) -> NodeId {
        if let Some(&id) = self.index.get(&p) {
            return id;
        }
        let id = self.prods.len() as NodeId;
        self.prods.push(p);
        self.lens.push(len);
        self.index.insert(p, id);
        id
    }

    pub fn leaf(&mut self, a: Letter) -> NodeId {
        self.intern(Prod::Leaf(a), 1)
    }

    pub fn pair(&mut self, l: NodeId, r: NodeId) -> Result<NodeId, SlpError> {
        let len = self.lens[l as usize]
            .checked_add(self.lens[r as usize])
            .ok_or(SlpError::Overflow)?;
        Ok(self.intern(Prod::Pair(l, r), len))
    }

    /// Concatenation of optional nodes.
    pub fn join(&mut self, l: Option<NodeId>, r: Option<NodeId>) -> Result<Option<NodeId>, SlpError> {
        Ok(match (l, r) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => Some(self.pair(a, b)?),
        })
    }

    /// Balanced grammar for a plain word inside this SLP's node table.
    pub fn plain_node(&mut self, w: &[Letter]) -> Option<NodeId> {
        match w.len() {
            0 => None,
            1 => Some(self.leaf(w[0])),
            n => {
                let l = self.plain_node(&w[..n / 2]).expect("nonempty");
                let r = self.plain_node(&w[n / 2..]).expect("nonempty");
                Some(self.pair(l, r).expect("plain words fit in 64 bits"))
            }
        }
    }

    pub fn from_plain(w: &[Letter]) -> Slp {
        let mut s = Slp::empty();
        s.root = s.plain_node(w);
        s
    }

    fn with_root(mut self, root: Option<NodeId>) -> Slp {
        self.root = root;
        self
    }

    /// Copy of the reachable part with ids renumbered densely.
    pub fn compacted(&self) -> Slp {
        let mark = self.reachable();
        let mut out = Slp::empty();
        let mut map = vec![NodeId::MAX; self.prods.len()];
        for id in 0..self.prods.len() {
            if !mark[id] {
                continue;
            }
            map[id] = match self.prods[id] {
                Prod::Leaf(a) => out.leaf(a),
                Prod::Pair(l, r) => out
                    .pair(map[l as usize], map[r as usize])
                    .expect("lengths already fit"),
            };
        }
        out.root = self.root.map(|r| map[r as usize]);
        out
    }

    /// Import the reachable part of `other`, returning the id of its axiom.
    pub fn import(&mut self, other: &Slp) -> Option<NodeId> {
        let mark = other.reachable();
        let mut map = vec![NodeId::MAX; other.prods.len()];
        for id in 0..other.prods.len() {
            if !mark[id] {
                continue;
            }
            map[id] = match other.prods[id] {
                Prod::Leaf(a) => self.leaf(a),
                Prod::Pair(l, r) => self
                    .pair(map[l as usize], map[r as usize])
                    .expect("lengths already fit"),
            };
        }
        other.root.map(|r| map[r as usize])
    }

    pub fn concat(&self, other: &Slp) -> Result<Slp, SlpError> {
        let mut out = self.clone();
        let r = out.import(other);
        let root = out.join(self.root, r)?;
        Ok(out.with_root(root))
    }

    /// `w · self` for a plain word w.
    pub fn prepend_plain(&self, w: &[Letter]) -> Result<Slp, SlpError> {
        let mut out = self.clone();
        let p = out.plain_node(w);
        let root = out.join(p, self.root)?;
        Ok(out.with_root(root))
    }

    pub fn expand(&self, limit: u64) -> Result<Word, SlpError> {
        let len = self.len();
        if len > limit {
            return Err(SlpError::ExpansionTooLarge { len, limit });
        }
        let mut out = Vec::with_capacity(len as usize);
        self.for_each_letter(self.root, |a| {
            out.push(a);
            true
        });
        Ok(out)
    }

    /// Visit the letters of a node left to right until `f` returns false.
    fn for_each_letter(&self, node: Option<NodeId>, mut f: impl FnMut(Letter) -> bool) {
        let mut stack: Vec<NodeId> = node.into_iter().collect();
        while let Some(id) = stack.pop() {
            match self.prods[id as usize] {
                Prod::Leaf(a) => {
                    if !f(a) {
                        return;
                    }
                }
                Prod::Pair(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
    }

    /// Node for the factor `[i, j)` of `node`, built inside this SLP.
    fn factor_node(&mut self, node: NodeId, i: u64, j: u64) -> Result<Option<NodeId>, SlpError> {
        if i >= j {
            return Ok(None);
        }
        if i == 0 && j == self.lens[node as usize] {
            return Ok(Some(node));
        }
        match self.prods[node as usize] {
            Prod::Leaf(_) => Ok(Some(node)),
            Prod::Pair(l, r) => {
                let ll = self.lens[l as usize];
                if j <= ll {
                    self.factor_node(l, i, j)
                } else if i >= ll {
                    self.factor_node(r, i - ll, j - ll)
                } else {
                    let a = self.factor_node(l, i, ll)?;
                    let b = self.factor_node(r, 0, j - ll)?;
                    self.join(a, b)
                }
            }
        }
    }

    pub fn factor(&self, i: u64, j: u64) -> Result<Slp, SlpError> {
        let len = self.len();
        if i > j || j > len {
            return Err(SlpError::IndexOutOfRange { start: i, end: j, len });
        }
        let mut out = self.clone();
        let root = match self.root {
            Some(r) => out.factor_node(r, i, j)?,
            None => None,
        };
        Ok(out.with_root(root))
    }

    /// Node for `v^{num/|v|}` (the length-`num` prefix of `v^∞`).
    pub fn power_node(&mut self, v: &[Letter], num: &BigUint) -> Result<Option<NodeId>, SlpError> {
        if num.is_zero() {
            return Ok(None);
        }
        assert!(!v.is_empty(), "power of the empty word");
        let total = num.to_u64().ok_or(SlpError::Overflow)?;
        let q = total / v.len() as u64;
        let r = (total % v.len() as u64) as usize;
        let base = self.plain_node(v).expect("nonempty");
        let mut acc: Option<NodeId> = None;
        for bit in (0..64 - q.leading_zeros()).rev() {
            acc = self.join(acc, acc)?;
            if q >> bit & 1 == 1 {
                acc = self.join(acc, Some(base))?;
            }
        }
        let tail = self.plain_node(&v[..r]);
        self.join(acc, tail)
    }

    pub fn power(v: &[Letter], num: &BigUint) -> Result<Slp, SlpError> {
        let mut s = Slp::empty();
        let root = s.power_node(v, num)?;
        Ok(s.with_root(root))
    }

    /// Letters occurring in the expansion.
    pub fn letters(&self) -> BTreeSet<Letter> {
        let mark = self.reachable();
        self.prods
            .iter()
            .zip(mark)
            .filter_map(|(p, m)| match (p, m) {
                (Prod::Leaf(a), true) => Some(*a),
                _ => None,
            })
            .collect()
    }

    /// Number of occurrences of each letter `0..nletters` in the expansion.
    pub fn letter_counts(&self, nletters: usize) -> Vec<u64> {
        let mark = self.reachable();
        let mut counts: Vec<Vec<u64>> = vec![Vec::new(); self.prods.len()];
        for id in 0..self.prods.len() {
            if !mark[id] {
                continue;
            }
            counts[id] = match self.prods[id] {
                Prod::Leaf(a) => {
                    let mut c = vec![0; nletters];
                    c[a as usize] += 1;
                    c
                }
                Prod::Pair(l, r) => counts[l as usize]
                    .iter()
                    .zip(&counts[r as usize])
                    .map(|(a, b)| a + b)
                    .collect(),
            };
        }
        match self.root {
            Some(r) => std::mem::take(&mut counts[r as usize]),
            None => vec![0; nletters],
        }
    }

    pub fn to_grammar(&self, name: impl Fn(Letter) -> String) -> String {
        let c = self.compacted();
        let mut out = String::new();
        for (id, p) in c.prods.iter().enumerate() {
            match p {
                Prod::Leaf(a) => out.push_str(&format!("X{id} -> {}\n", name(*a))),
                Prod::Pair(l, r) => out.push_str(&format!("X{id} -> X{l} X{r}\n")),
            }
        }
        match c.root {
            Some(r) => out.push_str(&format!("axiom X{r}\n")),
            None => out.push_str("axiom eps\n"),
        }
        out
    }

    pub fn from_grammar(text: &str, letter: impl Fn(&str) -> Option<Letter>) -> Result<Slp, SlpError> {
        let mut out = Slp::empty();
        let mut ids: HashMap<String, NodeId> = HashMap::new();
        let mut root: Option<Option<NodeId>> = None;
        for (i, line) in text.lines().enumerate() {
            let err = |msg: String| SlpError::Grammar { line: i + 1, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                [] => {}
                ["axiom", "eps"] => root = Some(None),
                ["axiom", x] => {
                    let id = *ids.get(*x).ok_or_else(|| err(format!("undefined nonterminal {x}")))?;
                    root = Some(Some(id));
                }
                [x, "->", a] => {
                    let l = letter(a).ok_or_else(|| err(format!("unknown letter {a}")))?;
                    if ids.contains_key(*x) {
                        return Err(err(format!("nonterminal {x} defined twice")));
                    }
                    let id = out.leaf(l);
                    ids.insert(x.to_string(), id);
                }
                [x, "->", l, r] => {
                    let get = |n: &str| ids.get(n).copied().ok_or_else(|| err(format!("undefined nonterminal {n}")));
                    let (l, r) = (get(l)?, get(r)?);
                    if ids.contains_key(*x) {
                        return Err(err(format!("nonterminal {x} defined twice")));
                    }
                    let id = out.pair(l, r).map_err(|e| err(e.to_string()))?;
                    ids.insert(x.to_string(), id);
                }
                _ => return Err(err(format!("cannot parse `{line}`"))),
            }
        }
        let root = root.ok_or(SlpError::Grammar { line: text.lines().count(), msg: "missing axiom".into() })?;
        Ok(out.with_root(root))
    }

    /// Leaf production ids in id order, for tests that tamper with letters.
    pub fn leaf_ids(&self) -> Vec<NodeId> {
        let mark = self.reachable();
        (0..self.prods.len() as NodeId)
            .filter(|&i| mark[i as usize] && matches!(self.prods[i as usize], Prod::Leaf(_)))
            .collect()
    }
}

/// Greedy embedding counts of every node into `v^∞`.
///
/// `cost[A][i]` is the number of letters of `v^∞`, read from offset `i`,
/// consumed when embedding A greedily.
pub struct PowerEmbedding<'a> {
    slp: &'a Slp,
    vlen: u128,
    cost: Vec<u128>,
    /// Every reachable letter occurs in v.
    pub alphabet_ok: bool,
}

const NONE_COST: u128 = u128::MAX;

impl<'a> PowerEmbedding<'a> {
    pub fn new(slp: &'a Slp, v: &[Letter]) -> Self {
        let n = v.len();
        let mut alphabet_ok = true;
        if n == 0 {
            return PowerEmbedding { slp, vlen: 0, cost: Vec::new(), alphabet_ok: slp.is_empty() };
        }
        // next[a][i]: distance from offset i to the first a in v^∞, plus one.
        let letters: BTreeSet<Letter> = v.iter().copied().collect();
        let mut next: HashMap<Letter, Vec<u128>> = HashMap::new();
        for &a in &letters {
            let d = (0..n)
                .map(|i| (0..n).find(|&k| v[(i + k) % n] == a).expect("a occurs in v") as u128 + 1)
                .collect();
            next.insert(a, d);
        }
        let mark = slp.reachable();
        let mut cost = vec![NONE_COST; slp.prods.len() * n];
        for id in 0..slp.prods.len() {
            if !mark[id] {
                continue;
            }
            match slp.prods[id] {
                Prod::Leaf(a) => match next.get(&a) {
                    Some(d) => cost[id * n..(id + 1) * n].copy_from_slice(d),
                    None => alphabet_ok = false,
                },
                Prod::Pair(l, r) => {
                    for i in 0..n {
                        let cl = cost[l as usize * n + i];
                        if cl == NONE_COST {
                            break;
                        }
                        let j = ((i as u128 + cl) % n as u128) as usize;
                        let cr = cost[r as usize * n + j];
                        if cr == NONE_COST {
                            break;
                        }
                        cost[id * n + i] = cl + cr;
                    }
                }
            }
        }
        PowerEmbedding { slp, vlen: n as u128, cost, alphabet_ok }
    }

    fn node_cost(&self, id: NodeId, shift: u128) -> u128 {
        self.cost[id as usize * self.vlen as usize + shift as usize]
    }

    /// Letters of `v^∞` consumed by the suffix of `node` starting at `start`.
    fn suffix_cost(&self, node: NodeId, start: u64) -> u128 {
        let mut total: u128 = 0;
        let mut pending: Vec<NodeId> = Vec::new();
        let mut cur = node;
        let mut start = start;
        // Walk down to the split point, collecting the right siblings that
        // lie entirely inside the suffix.
        loop {
            if start == 0 {
                pending.push(cur);
                break;
            }
            match self.slp.prods[cur as usize] {
                Prod::Leaf(_) => break,
                Prod::Pair(l, r) => {
                    let ll = self.slp.lens[l as usize];
                    if start >= ll {
                        cur = r;
                        start -= ll;
                    } else {
                        pending.push(r);
                        cur = l;
                    }
                }
            }
        }
        for &id in pending.iter().rev() {
            let c = self.node_cost(id, total % self.vlen);
            if c == NONE_COST {
                return NONE_COST;
            }
            total += c;
        }
        total
    }

    /// Does the suffix of the axiom starting at `start` embed in a prefix of
    /// length `budget` of `v^∞`?
    pub fn suffix_fits(&self, start: u64, budget: &BigUint) -> bool {
        let Some(root) = self.slp.root else { return true };
        if start >= self.slp.len() {
            return true;
        }
        if self.vlen == 0 {
            return false;
        }
        let c = self.suffix_cost(root, start);
        c != NONE_COST && BigUint::from(c) <= *budget
    }
}

/// `X ⊑ v^{num/|v|}`.
pub fn subword_of_power(x: &Slp, v: &[Letter], num: &BigUint) -> bool {
    if x.is_empty() {
        return true;
    }
    let e = PowerEmbedding::new(x, v);
    e.alphabet_ok && e.suffix_fits(0, num)
}

/// Length of `X/v^k`: the shortest prefix whose removal leaves a subword of
/// `v^k`, found by dichotomic search over the prefix length.
pub fn residual_power_len(x: &Slp, v: &[Letter], k: &BigUint) -> u64 {
    if v.is_empty() || k.is_zero() || x.is_empty() {
        return x.len();
    }
    let budget = k * BigUint::from(v.len());
    let e = PowerEmbedding::new(x, v);
    residual_len_with(x, &e, &budget)
}

fn residual_len_with(x: &Slp, e: &PowerEmbedding<'_>, budget: &BigUint) -> u64 {
    // Smallest ell in [0, |X|] with X[ell..] ⊑ v^k; the property is monotone
    // in ell.
    let (mut lo, mut hi) = (0, x.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if e.suffix_fits(mid, budget) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// `X/v^k` as an SLP.
pub fn residual_power(x: &Slp, v: &[Letter], k: &BigUint) -> Slp {
    let ell = residual_power_len(x, v, k);
    x.factor(0, ell).expect("prefix in range").compacted_if_large()
}

impl Slp {
    fn compacted_if_large(self) -> Slp {
        if self.prods.len() > 4 * self.size().max(64) {
            self.compacted()
        } else {
            self
        }
    }
}

/// `x ⊑ Y` for a plain x, by a greedy pass over Y's grammar: for every
/// node and every number j of letters of x already matched, record how many
/// are matched after the node.
pub fn subword(x: &[Letter], y: &Slp) -> bool {
    if x.is_empty() {
        return true;
    }
    if (x.len() as u64) > y.len() {
        return false;
    }
    let Some(root) = y.root else { return false };
    let m = x.len() + 1;
    let mark = y.reachable();
    let mut table = vec![0u32; y.prods.len() * m];
    for (id, &live) in mark.iter().enumerate().take(y.prods.len()) {
        if !live {
            continue;
        }
        for j in 0..m {
            table[id * m + j] = match y.prods[id] {
                Prod::Leaf(a) => {
                    if j < x.len() && x[j] == a {
                        j as u32 + 1
                    } else {
                        j as u32
                    }
                }
                Prod::Pair(l, r) => {
                    let after_l = table[l as usize * m + j];
                    table[r as usize * m + after_l as usize]
                }
            };
        }
    }
    table[root as usize * m] as usize == x.len()
}

/// `X ⊑ y` for a plain y: walk the letters of X with a cursor into y.
pub fn subword_rev(x: &Slp, y: &[Letter]) -> bool {
    if x.len() > y.len() as u64 {
        return false;
    }
    let mut j = 0;
    let mut ok = true;
    x.for_each_letter(x.root, |a| {
        while j < y.len() && y[j] != a {
            j += 1;
        }
        if j == y.len() {
            ok = false;
            return false;
        }
        j += 1;
        true
    });
    ok
}

const MOD: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % MOD as u128) as u64
}

fn powmod(mut b: u64, mut e: u64) -> u64 {
    let mut acc = 1u64;
    b %= MOD;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, b);
        }
        b = mulmod(b, b);
        e >>= 1;
    }
    acc
}

/// Karp–Rabin fingerprints of every node, modulo the Mersenne prime 2^61−1.
pub struct Fingerprints<'a> {
    slp: &'a Slp,
    base: u64,
    hash: Vec<u64>,
    pow: Vec<u64>,
}

impl<'a> Fingerprints<'a> {
    pub fn new(slp: &'a Slp, base: u64) -> Self {
        let base = base % (MOD - 2) + 2;
        let n = slp.prods.len();
        let mut hash = vec![0; n];
        let mut pow = vec![0; n];
        for id in 0..n {
            match slp.prods[id] {
                Prod::Leaf(a) => {
                    hash[id] = a as u64 + 1;
                    pow[id] = base;
                }
                Prod::Pair(l, r) => {
                    let (l, r) = (l as usize, r as usize);
                    hash[id] = (mulmod(hash[l], pow[r]) + hash[r]) % MOD;
                    pow[id] = mulmod(pow[l], pow[r]);
                }
            }
        }
        Fingerprints { slp, base, hash, pow }
    }

    pub fn whole(&self) -> u64 {
        self.slp.root.map_or(0, |r| self.hash[r as usize])
    }

    /// Fingerprint of the prefix of length m.
    pub fn prefix(&self, m: u64) -> u64 {
        let Some(mut cur) = self.slp.root else { return 0 };
        let mut m = m;
        let mut acc = 0u64;
        while m > 0 {
            if m == self.slp.lens[cur as usize] {
                return (mulmod(acc, self.pow[cur as usize]) + self.hash[cur as usize]) % MOD;
            }
            match self.slp.prods[cur as usize] {
                Prod::Leaf(_) => unreachable!("prefix longer than leaf"),
                Prod::Pair(l, r) => {
                    let ll = self.slp.lens[l as usize];
                    if m <= ll {
                        cur = l;
                    } else {
                        acc = (mulmod(acc, self.pow[l as usize]) + self.hash[l as usize]) % MOD;
                        m -= ll;
                        cur = r;
                    }
                }
            }
        }
        acc
    }

    /// Fingerprint of the factor `[i, j)`.
    pub fn range(&self, i: u64, j: u64) -> u64 {
        let hj = self.prefix(j);
        let hi = mulmod(self.prefix(i), powmod(self.base, j - i));
        (hj + MOD - hi) % MOD
    }

    pub fn of_plain(&self, w: &[Letter]) -> u64 {
        w.iter().fold(0, |acc, &a| (mulmod(acc, self.base) + a as u64 + 1) % MOD)
    }
}

/// Fingerprint base drawn at random so that adversarial inputs cannot
/// target a fixed base.
pub fn random_base() -> u64 {
    rand::random::<u64>()
}

/// Probabilistic equality of expansions (Karp–Rabin, base chosen by caller).
pub fn equal_with(a: &Slp, b: &Slp, base: u64) -> bool {
    a.len() == b.len() && Fingerprints::new(a, base).whole() == Fingerprints::new(b, base).whole()
}

pub fn equal(a: &Slp, b: &Slp) -> bool {
    equal_with(a, b, random_base())
}

/// X is a prefix of Y.
pub fn is_prefix(x: &Slp, y: &Slp) -> bool {
    if x.len() > y.len() {
        return false;
    }
    let base = random_base();
    Fingerprints::new(x, base).whole() == Fingerprints::new(y, base).prefix(x.len())
}

/// X is a suffix of Y.
pub fn is_suffix(x: &Slp, y: &Slp) -> bool {
    if x.len() > y.len() {
        return false;
    }
    let base = random_base();
    Fingerprints::new(x, base).whole() == Fingerprints::new(y, base).range(y.len() - x.len(), y.len())
}

/// X is a factor of Y. X is expanded (it must fit in `limit` letters); every
/// occurrence either lies in a leaf or straddles the split point of some
/// pair, so only windows of `2(|X|−1)` letters around split points are
/// scanned.
pub fn is_factor(x: &Slp, y: &Slp, limit: u64) -> Result<bool, SlpError> {
    let pat = x.expand(limit)?;
    if pat.is_empty() {
        return Ok(true);
    }
    if pat.len() as u64 > y.len() {
        return Ok(false);
    }
    if pat.len() == 1 {
        return Ok(y.letters().contains(&pat[0]));
    }
    let fail = kmp_table(&pat);
    let k = pat.len() as u64 - 1;
    let mark = y.reachable();
    let mut scratch = y.clone();
    for (id, &live) in mark.iter().enumerate().take(y.prods.len()) {
        if !live {
            continue;
        }
        if let Prod::Pair(l, r) = y.prods[id] {
            let ll = y.lens[l as usize];
            let rl = y.lens[r as usize];
            let a = scratch.factor_node(l, ll.saturating_sub(k), ll)?;
            let b = scratch.factor_node(r, 0, rl.min(k))?;
            let mut window = Vec::new();
            scratch.for_each_letter(a, |c| {
                window.push(c);
                true
            });
            scratch.for_each_letter(b, |c| {
                window.push(c);
                true
            });
            if kmp_find(&pat, &fail, &window) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn kmp_table(p: &[Letter]) -> Vec<usize> {
    let mut f = vec![0; p.len()];
    let mut k = 0;
    for i in 1..p.len() {
        while k > 0 && p[i] != p[k] {
            k = f[k - 1];
        }
        if p[i] == p[k] {
            k += 1;
        }
        f[i] = k;
    }
    f
}

fn kmp_find(p: &[Letter], f: &[usize], t: &[Letter]) -> bool {
    let mut k = 0;
    for &c in t {
        while k > 0 && c != p[k] {
            k = f[k - 1];
        }
        if c == p[k] {
            k += 1;
            if k == p.len() {
                return true;
            }
        }
    }
    false
}

/// `pr[σ](X)` on SLPs.
pub fn pr(s: &[Action], x: &Slp) -> Result<Slp, SlpError> {
    let mut y = x.clone();
    for a in s.iter().rev() {
        y = match a.dir {
            Dir::Read => y.prepend_plain(&a.payload)?,
            Dir::Write => residual_power(&y, &a.payload, &BigUint::from(1u32)),
        };
    }
    Ok(y.compacted_if_large())
}

/// Dichotomic search for κ: the largest k with `X/v^k ≠ ε`, or the first
/// index from which `X/v^k` is constant when it never empties.
pub fn kappa(x: &Slp, v: &[Letter]) -> Kappa {
    if x.is_empty() {
        return Kappa::Finite(-1);
    }
    let e = PowerEmbedding::new(x, v);
    let len_at = |k: u64| -> u64 {
        if v.is_empty() || k == 0 {
            return x.len();
        }
        residual_len_with(x, &e, &(BigUint::from(k) * BigUint::from(v.len())))
    };
    let n = x.len();
    if e.alphabet_ok && !v.is_empty() {
        // X/v^k = ε for k = |X|; find the first such k.
        let (mut lo, mut hi) = (0u64, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if len_at(mid) == 0 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Kappa::Finite(lo as i64 - 1)
    } else {
        // The residual of X by v^k is the same as that of its prefix, so it
        // decreases strictly until it stabilises; find the first k with
        // len(k) == len(k + 1).
        let (mut lo, mut hi) = (0u64, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if len_at(mid) == len_at(mid + 1) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Kappa::Infinite { stable_at: lo as usize }
    }
}

/// `u^k · X/v^k`, the value of `pr(σ^k, X)` while k does not exceed κ.
pub fn power_times_residual(x: &Slp, u: &[Letter], v: &[Letter], k: &BigUint) -> Result<Slp, SlpError> {
    let rest = residual_power(x, v, k);
    let mut out = rest.clone();
    let p = out.power_node(u, &(k * BigUint::from(u.len())))?;
    let root = out.join(p, rest.root)?;
    Ok(out.with_root(root).compacted_if_large())
}

/// `pr(σ^k, X)` on SLPs.
pub fn pr_iter(s: &[Action], x: &Slp, k: &BigUint) -> Result<Slp, SlpError> {
    let u = rea(s);
    let v = wri(s);
    if k.is_zero() {
        return Ok(x.clone());
    }
    if u.is_empty() {
        return Ok(residual_power(x, &v, k));
    }
    let kap = kappa(x, &v);
    let direct = match kap {
        Kappa::Infinite { .. } => true,
        Kappa::Finite(kp) => kp >= 0 && *k <= BigUint::from(kp as u64),
    };
    if direct {
        return power_times_residual(x, &u, &v, k);
    }
    let Kappa::Finite(kp) = kap else { unreachable!() };
    let q0 = if kp < 0 {
        BigUint::zero()
    } else {
        let y = power_times_residual(x, &u, &v, &BigUint::from(kp as u64))?;
        let z = pr(s, &y)?;
        BigUint::from(z.len())
    };
    let start = BigUint::from((kp + 1) as u64);
    let num = PowerMap::new(s).iterate(&q0, &(k - start));
    Slp::power(&u, &num)
}

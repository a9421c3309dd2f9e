//! Cycle acceleration: `pr[σ^k]` in time polynomial in `log k`, iteration
//! numbers, bases of `Pre[σ*]`, ω-fixpoints and repeated-coverability
//! constraints.
//!
//! Throughout, `u = rea(σ)` and `v = wri(σ)`. Iterating σ backwards from x
//! first produces `u^k·(x/v^k)` while `x/v^k` is nonempty; after that every
//! value is a fractional power of u and only its length (the numerator over
//! `|u|`) needs to be tracked.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::machine::{rea, wri, Action};
use crate::words::{alphabet_of, is_subword, minimize, power_prefix, pr, residual_len, Letter, Word};

/// `u^{num/|u|}`: the prefix of length `num` of `u^∞`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FracPower {
    pub base: Word,
    pub num: BigUint,
}

impl FracPower {
    pub fn new(base: Word, num: BigUint) -> Self {
        assert!(!base.is_empty(), "fractional power of the empty word");
        FracPower { base, num }
    }

    pub fn den(&self) -> usize {
        self.base.len()
    }

    /// Integral part of the exponent and the remainder letters.
    pub fn split(&self) -> (BigUint, usize) {
        let (q, r) = self.num.div_rem(&BigUint::from(self.base.len()));
        (q, r.to_usize().expect("remainder below |u|"))
    }

    pub fn expand(&self, limit: usize) -> Option<Word> {
        let n = self.num.to_usize().filter(|&n| n <= limit)?;
        Some(power_prefix(&self.base, n))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AccelError {
    #[error("fractional power base does not match rea(σ)")]
    BaseMismatch,
    #[error("rea(σ) is empty")]
    EmptyBase,
}

/// `pr(σ^k, x) = u^{num/|u|} · x[..ell]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrePowerResult {
    pub num: BigUint,
    pub ell: usize,
}

impl PrePowerResult {
    pub fn expand(&self, u: &[Letter], x: &[Letter], limit: usize) -> Option<Word> {
        let n = self.num.to_usize()?;
        if n + self.ell > limit {
            return None;
        }
        let mut w = power_prefix(u, n);
        w.extend_from_slice(&x[..self.ell]);
        Some(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kappa {
    /// Largest k with `x/v^k ≠ ε`; -1 when x is empty.
    Finite(i64),
    /// `x/v^k` never becomes empty. It is constant from `stable_at` on.
    Infinite { stable_at: usize },
}

pub fn kappa(x: &[Letter], v: &[Letter]) -> Kappa {
    if x.is_empty() {
        return Kappa::Finite(-1);
    }
    let av = alphabet_of(v);
    let infinite = x.iter().any(|c| !av.contains(c));
    let mut cur = x.len();
    let mut k = 0usize;
    loop {
        let next = residual_len(&x[..cur], v);
        if next == 0 {
            debug_assert!(!infinite);
            return Kappa::Finite(k as i64);
        }
        if next == cur {
            debug_assert!(infinite);
            return Kappa::Infinite { stable_at: k };
        }
        cur = next;
        k += 1;
    }
}

/// `x/v^k` by repeated residuals, stopping early once the value is stable.
pub fn residual_iter(x: &[Letter], v: &[Letter], k: usize) -> Word {
    let mut cur = x.len();
    for _ in 0..k {
        let next = residual_len(&x[..cur], v);
        if next == cur {
            break;
        }
        cur = next;
    }
    x[..cur].to_vec()
}

fn big(n: usize) -> BigUint {
    BigUint::from(n)
}

/// Length of `pr(σ, u^{num/|u|})` with `u = rea(σ)`, given as a numerator.
///
/// Small numerators are folded directly. Beyond `|wri(σ)| + |u|` the result
/// exceeds one full copy of u, so the exponent is reduced by whole periods
/// and shifted back afterwards.
pub fn pr_power_len(s: &[Action], u: &[Letter], w_len: usize, num: &BigUint) -> BigUint {
    let ulen = u.len();
    let small_cap = w_len + ulen;
    if *num <= big(small_cap) {
        let n = num.to_usize().expect("small numerator");
        let y = pr(s, &power_prefix(u, n));
        debug_assert_eq!(y, power_prefix(u, y.len()), "pr of a power of u is a power of u");
        return big(y.len());
    }
    let shift = (num - big(w_len) - BigUint::one()) / big(ulen);
    let reduced = (num - &shift * big(ulen)).to_usize().expect("reduced numerator");
    let y = pr(s, &power_prefix(u, reduced));
    debug_assert!(y.len() > ulen);
    big(y.len()) + shift * big(ulen)
}

pub fn pr_power_on_frac(s: &[Action], p: &FracPower) -> Result<FracPower, AccelError> {
    let u = rea(s);
    if u.is_empty() {
        return Err(AccelError::EmptyBase);
    }
    if p.base != u {
        return Err(AccelError::BaseMismatch);
    }
    let num = pr_power_len(s, &u, wri(s).len(), &p.num);
    Ok(FracPower::new(u, num))
}

/// Numerator map `Q ↦ |pr(σ, u^{Q/|u|})|` for a fixed σ.
pub struct PowerMap<'a> {
    s: &'a [Action],
    u: Word,
    w_len: usize,
}

impl<'a> PowerMap<'a> {
    pub fn new(s: &'a [Action]) -> Self {
        let u = rea(s);
        assert!(!u.is_empty(), "power map needs rea(σ) ≠ ε");
        PowerMap { s, u, w_len: wri(s).len() }
    }

    pub fn base(&self) -> &[Letter] {
        &self.u
    }

    pub fn apply(&self, q: &BigUint) -> BigUint {
        pr_power_len(self.s, &self.u, self.w_len, q)
    }

    /// Apply the map `steps` times starting from `q`.
    ///
    /// The sequence is monotone. Two indices i < j with the same numerator
    /// modulo |u| and `f(Q_i) > |u|` make the sequence shift by
    /// `D = Q_j − Q_i` every `P = j − i` steps, so whole periods are skipped.
    /// A decreasing run may only be skipped while it stays above `|u|`.
    pub fn iterate(&self, q0: &BigUint, steps: &BigUint) -> BigUint {
        let ulen = big(self.u.len());
        let mut q = q0.clone();
        let mut r = steps.clone();
        let mut idx: u64 = 0;
        let mut seen: HashMap<BigUint, (u64, BigUint)> = HashMap::new();
        while !r.is_zero() {
            let next = self.apply(&q);
            if next == q {
                return q;
            }
            if next > ulen {
                let res = &q % &ulen;
                if let Some((i, qi)) = seen.get(&res) {
                    let period = big((idx - i) as usize);
                    let t = if q > *qi {
                        let d = &q - qi;
                        let t = &r / &period;
                        q += &t * d;
                        t
                    } else {
                        let d = qi - &q;
                        let room = (&q - &ulen - BigUint::one()) / &d;
                        let t = (&r / &period).min(room);
                        q -= &t * d;
                        t
                    };
                    if !t.is_zero() {
                        r -= t * period;
                        seen.clear();
                        continue;
                    }
                }
                seen.insert(res, (idx, q.clone()));
            }
            q = next;
            r -= 1u32;
            idx += 1;
        }
        q
    }

    /// Number of steps until the sequence from `q0` stops changing, with the
    /// limit value. Only meaningful when the sequence is non-increasing.
    pub fn limit(&self, q0: &BigUint) -> (BigUint, BigUint) {
        let ulen = big(self.u.len());
        let mut q = q0.clone();
        let mut taken = BigUint::zero();
        let mut idx: u64 = 0;
        let mut seen: HashMap<BigUint, (u64, BigUint)> = HashMap::new();
        loop {
            let next = self.apply(&q);
            assert!(next <= q, "limit() called on an increasing sequence");
            if next == q {
                return (taken, q);
            }
            if next > ulen {
                let res = &q % &ulen;
                if let Some((i, qi)) = seen.get(&res) {
                    let period = big((idx - i) as usize);
                    let d = qi - &q;
                    let t = (&q - &ulen - BigUint::one()) / &d;
                    if !t.is_zero() {
                        q -= &t * d;
                        taken += t * period;
                        seen.clear();
                        continue;
                    }
                }
                seen.insert(res, (idx, q.clone()));
            }
            q = next;
            taken += 1u32;
            idx += 1;
        }
    }
}

/// `pr(σ^k, x)` as `u^{p_k}·x[..ℓ_k]`.
pub fn pr_iter(s: &[Action], x: &[Letter], k: &BigUint) -> PrePowerResult {
    let u = rea(s);
    let v = wri(s);
    if u.is_empty() {
        let steps = k.to_usize().unwrap_or(usize::MAX).min(x.len() + 1);
        return PrePowerResult { num: BigUint::zero(), ell: residual_iter(x, &v, steps).len() };
    }
    let ulen = big(u.len());
    match kappa(x, &v) {
        Kappa::Infinite { stable_at } => {
            let steps = k.to_usize().unwrap_or(usize::MAX).min(stable_at);
            PrePowerResult { num: k * &ulen, ell: residual_iter(x, &v, steps).len() }
        }
        Kappa::Finite(kap) if kap >= 0 && *k <= BigUint::from(kap as u64) => {
            let kk = k.to_usize().expect("k ≤ κ ≤ |x|");
            PrePowerResult { num: k * &ulen, ell: residual_iter(x, &v, kk).len() }
        }
        Kappa::Finite(kap) => {
            let q0 = first_power_len(s, &u, &v, x, kap);
            let start = BigUint::from((kap + 1) as u64);
            let num = PowerMap::new(s).iterate(&q0, &(k - start));
            PrePowerResult { num, ell: 0 }
        }
    }
}

/// Numerator of `pr(σ^{κ+1}, x)`, the first value that is a pure power of u.
fn first_power_len(s: &[Action], u: &[Letter], v: &[Letter], x: &[Letter], kap: i64) -> BigUint {
    if kap < 0 {
        return BigUint::zero();
    }
    let kap = kap as usize;
    let mut y = power_prefix(u, kap * u.len());
    y.extend(residual_iter(x, v, kap));
    let z = pr(s, &y);
    debug_assert_eq!(z, power_prefix(u, z.len()));
    big(z.len())
}

/// The plain sequence `y_0 = x, y_{i+1} = pr(σ, y_i)` for `i ≤ n`.
pub fn pr_sequence(s: &[Action], x: &[Letter], n: usize) -> Vec<Word> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(x.to_vec());
    for i in 0..n {
        let next = pr(s, &out[i]);
        out.push(next);
    }
    out
}

/// Smallest L such that some `y_ℓ`, `ℓ ≤ L`, is a subword of `y_{L+1}`.
pub fn iteration_number(s: &[Action], x: &[Letter]) -> usize {
    let mut minimal: Vec<Word> = vec![x.to_vec()];
    let mut y = x.to_vec();
    let mut l = 0;
    loop {
        let next = pr(s, &y);
        if minimal.iter().any(|m| is_subword(m, &next)) {
            return l;
        }
        minimal.retain(|m| !is_subword(&next, m));
        minimal.push(next.clone());
        y = next;
        l += 1;
    }
}

/// Antichain of words together with the iteration index producing each.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Basis {
    pub elems: Vec<(Word, usize)>,
}

impl Basis {
    pub fn covers(&self, z: &[Letter]) -> bool {
        self.elems.iter().any(|(w, _)| is_subword(w, z))
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.elems.iter().map(|(w, _)| w)
    }
}

/// Minimal elements of `{pr(σ^i, x) : i ≤ L(σ, x)}`.
pub fn pre_star_basis(s: &[Action], x: &[Letter]) -> Basis {
    let l = iteration_number(s, x);
    let seq = pr_sequence(s, x, l);
    let keep = minimize(&seq);
    Basis { elems: keep.into_iter().map(|i| (seq[i].clone(), i)).collect() }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OmegaResult {
    Word(Word),
    Bottom,
}

/// `pr[σ^ω](ε)`: the minimal content from which σ can be iterated forever.
///
/// The iterates from ε increase. They either reach a fixpoint or repeat a
/// numerator class modulo |u| above |u|, after which they grow by a fixed
/// amount every period and never stabilise.
pub fn pr_omega(s: &[Action]) -> OmegaResult {
    let u = rea(s);
    let mut y: Word = Vec::new();
    let mut seen: HashMap<usize, usize> = HashMap::new();
    loop {
        let next = pr(s, &y);
        if next == y {
            return OmegaResult::Word(y);
        }
        debug_assert!(is_subword(&y, &next) && next.len() > y.len());
        if next.len() > u.len() {
            if let Some(&prev) = seen.get(&(y.len() % u.len())) {
                debug_assert!(prev < y.len());
                return OmegaResult::Bottom;
            }
            seen.insert(y.len() % u.len(), y.len());
        }
        y = next;
    }
}

/// `|wri(σ)| = ℓ > 0` and `rea(σ)^ℓ ⊑ wri(σ)^{ℓ−1}`.
pub fn is_increasing(s: &[Action]) -> bool {
    let u = rea(s);
    let v = wri(s);
    let l = v.len();
    if l == 0 {
        return false;
    }
    let ul = u.repeat(l);
    let vl = v.repeat(l - 1);
    is_subword(&ul, &vl)
}

/// Embedding of `rea(σ)^ℓ` into `wri(σ)^{ℓ−1}` as positions, for
/// increasing σ.
pub fn increasing_certificate(s: &[Action]) -> Option<Vec<usize>> {
    if !is_increasing(s) {
        return None;
    }
    let u = rea(s);
    let v = wri(s);
    let l = v.len();
    let ul = u.repeat(l);
    let vl = v.repeat(l - 1);
    let mut pos = Vec::with_capacity(ul.len());
    let mut j = 0;
    for &c in &ul {
        while vl[j] != c {
            j += 1;
        }
        pos.push(j);
        j += 1;
    }
    Some(pos)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepCovStatus {
    Stabilized,
    CapExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepCovConstraints {
    pub constraints: Vec<Word>,
    pub status: RepCovStatus,
}

impl RepCovConstraints {
    /// z satisfies every constraint. Always false when the cap was hit.
    pub fn membership(&self, z: &[Letter]) -> bool {
        self.status == RepCovStatus::Stabilized && self.constraints.iter().all(|y| is_subword(y, z))
    }
}

pub fn rep_cov_cap(s: &[Action], x: &[Letter]) -> usize {
    2 * (x.len() + 1) * (rea(s).len() + 1) + 2
}

/// Constraints `y_0 … y_K` with `y_i = pr(σ^i, x)`, stopping at the first
/// `y_{K+1}` that is implied by an earlier constraint.
pub fn rep_cov_constraints(s: &[Action], x: &[Letter]) -> RepCovConstraints {
    let cap = rep_cov_cap(s, x);
    let mut ys = vec![x.to_vec()];
    loop {
        let next = pr(s, ys.last().expect("nonempty"));
        if ys.iter().any(|y| is_subword(&next, y)) {
            return RepCovConstraints { constraints: ys, status: RepCovStatus::Stabilized };
        }
        if ys.len() >= cap {
            return RepCovConstraints { constraints: ys, status: RepCovStatus::CapExceeded };
        }
        ys.push(next);
    }
}

/// Minimal elements of `↑y_0 ∩ … ∩ ↑y_K`: the minimal common superwords.
/// Exponential in general; used only for short constraint lists.
pub fn minimal_common_superwords(ys: &[Word], limit: usize) -> Option<Vec<Word>> {
    let mut acc: Vec<Word> = vec![Vec::new()];
    for y in ys {
        let mut next: Vec<Word> = Vec::new();
        for a in &acc {
            for w in shuffles_min(a, y) {
                next.push(w);
            }
        }
        let keep = minimize(&next);
        acc = keep.into_iter().map(|i| next[i].clone()).collect();
        acc.sort();
        acc.dedup();
        if acc.len() > limit {
            return None;
        }
    }
    Some(acc)
}

/// Minimal words containing both a and b as subwords.
fn shuffles_min(a: &[Letter], b: &[Letter]) -> Vec<Word> {
    // memo over (i, j): minimal common superwords of a[i..] and b[j..]
    let n = a.len();
    let m = b.len();
    let mut table: Vec<Vec<Vec<Word>>> = vec![vec![Vec::new(); m + 1]; n + 1];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            let cell: Vec<Word> = if i == n {
                vec![b[j..].to_vec()]
            } else if j == m {
                vec![a[i..].to_vec()]
            } else if a[i] == b[j] {
                table[i + 1][j + 1].iter().map(|w| prepend(a[i], w)).collect()
            } else {
                let mut c: Vec<Word> = table[i + 1][j].iter().map(|w| prepend(a[i], w)).collect();
                c.extend(table[i][j + 1].iter().map(|w| prepend(b[j], w)));
                let keep = minimize(&c);
                let mut c: Vec<Word> = keep.into_iter().map(|k| c[k].clone()).collect();
                c.sort();
                c.dedup();
                c
            };
            table[i][j] = cell;
        }
    }
    std::mem::take(&mut table[0][0])
}

fn prepend(c: Letter, w: &[Letter]) -> Word {
    let mut out = Vec::with_capacity(w.len() + 1);
    out.push(c);
    out.extend_from_slice(w);
    out
}

/// `pr(σ^k, x)` for an arbitrary exponent, expanded (small results only).
pub fn pr_power_word(s: &[Action], x: &[Letter], k: &BigUint, limit: usize) -> Option<Word> {
    pr_iter(s, x, k).expand(&rea(s), x, limit)
}

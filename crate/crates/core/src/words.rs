//! Plain words: subword ordering, residuals, forward erasure and the
//! backward transfer function `pr`.

use std::collections::BTreeSet;

use crate::machine::{Action, Dir};

pub type Letter = u16;
pub type Word = Vec<Letter>;

/// `u ⊑ v`: u embeds in v as a scattered subword.
pub fn is_subword(u: &[Letter], v: &[Letter]) -> bool {
    if u.len() > v.len() {
        return false;
    }
    let mut it = u.iter().peekable();
    for c in v {
        match it.peek() {
            None => return true,
            Some(&&a) if a == *c => {
                it.next();
            }
            _ => {}
        }
    }
    it.peek().is_none()
}

/// Length of the residual `x/v`, computed right to left.
pub fn residual_len(x: &[Letter], v: &[Letter]) -> usize {
    let mut i = x.len();
    let mut j = v.len();
    while i > 0 && j > 0 {
        if x[i - 1] == v[j - 1] {
            i -= 1;
        }
        j -= 1;
    }
    i
}

/// `x/v`: the prefix of x left after removing its longest suffix that is a
/// subword of v.
pub fn residual(x: &[Letter], v: &[Letter]) -> Word {
    x[..residual_len(x, v)].to_vec()
}

/// Forward effect of reading u: scan x from the left, consuming the letters
/// of u in order and dropping everything before each match. Undefined iff
/// `u ⋢ x`.
pub fn ominus(x: &[Letter], u: &[Letter]) -> Option<Word> {
    let mut i = 0;
    for &a in u {
        while i < x.len() && x[i] != a {
            i += 1;
        }
        if i == x.len() {
            return None;
        }
        i += 1;
    }
    Some(x[i..].to_vec())
}

/// Minimal predecessor of one action: `?u` prepends u, `!v` takes the residual.
pub fn pr_action(a: &Action, x: &[Letter]) -> Word {
    match a.dir {
        Dir::Read => {
            let mut y = a.payload.clone();
            y.extend_from_slice(x);
            y
        }
        Dir::Write => residual(x, &a.payload),
    }
}

/// `pr[σ](x)`, folding the actions from the last one backwards.
pub fn pr(s: &[Action], x: &[Letter]) -> Word {
    let mut y = x.to_vec();
    for a in s.iter().rev() {
        y = pr_action(a, &y);
    }
    y
}

/// Letter-level decomposition of σ into pairs `?a_i !b_i` where either side
/// may be empty.
pub fn letter_pairs(s: &[Action]) -> Vec<(Option<Letter>, Option<Letter>)> {
    let flat: Vec<(Dir, Letter)> = s
        .iter()
        .flat_map(|a| a.payload.iter().map(move |&c| (a.dir, c)))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < flat.len() {
        match flat[i] {
            (Dir::Read, c) => {
                if let Some(&(Dir::Write, d)) = flat.get(i + 1) {
                    out.push((Some(c), Some(d)));
                    i += 2;
                } else {
                    out.push((Some(c), None));
                    i += 1;
                }
            }
            (Dir::Write, d) => {
                out.push((None, Some(d)));
                i += 1;
            }
        }
    }
    out
}

/// Small-step sequence `y_r, y'_r, …, y'_1, y_0` for `pr[σ](x)`.
pub fn sss(s: &[Action], x: &[Letter]) -> Vec<Word> {
    let pairs = letter_pairs(s);
    let mut out = vec![x.to_vec()];
    let mut y = x.to_vec();
    for &(a, b) in pairs.iter().rev() {
        let y1 = match b {
            Some(b) => residual(&y, &[b]),
            None => y.clone(),
        };
        out.push(y1.clone());
        y = match a {
            Some(a) => {
                let mut z = vec![a];
                z.extend(y1);
                z
            }
            None => y1,
        };
        out.push(y.clone());
    }
    out
}

/// Every distinct subword of w. Exponential; callers keep w short.
pub fn subwords(w: &[Letter]) -> BTreeSet<Word> {
    let mut out = BTreeSet::new();
    out.insert(Vec::new());
    for &c in w {
        let ext: Vec<Word> = out
            .iter()
            .map(|u| {
                let mut v = u.clone();
                v.push(c);
                v
            })
            .collect();
        out.extend(ext);
    }
    out
}

/// Longest channel content handled by [`lossy_step`].
pub const LOSSY_STEP_LIMIT: usize = 12;

/// All successors of x under one action with arbitrary message losses.
/// Returns `None` when the enumeration would exceed [`LOSSY_STEP_LIMIT`].
pub fn lossy_step(x: &[Letter], a: &Action) -> Option<BTreeSet<Word>> {
    match a.dir {
        Dir::Write => {
            if x.len() + a.payload.len() > LOSSY_STEP_LIMIT {
                return None;
            }
            let mut xw = x.to_vec();
            xw.extend_from_slice(&a.payload);
            Some(subwords(&xw))
        }
        Dir::Read => {
            if x.len() > LOSSY_STEP_LIMIT {
                return None;
            }
            // w·y ⊑ x iff y ⊑ x ⊖ w.
            Some(match ominus(x, &a.payload) {
                Some(rest) => subwords(&rest),
                None => BTreeSet::new(),
            })
        }
    }
}

/// Set of letters occurring in w.
pub fn alphabet_of(w: &[Letter]) -> BTreeSet<Letter> {
    w.iter().copied().collect()
}

/// The prefix of length `len` of `u^∞`.
pub fn power_prefix(u: &[Letter], len: usize) -> Word {
    assert!(!u.is_empty() || len == 0, "power of the empty word");
    (0..len).map(|i| u[i % u.len()]).collect()
}

/// Minimal elements of a set of words under ⊑, keeping first occurrences.
pub fn minimize(ws: &[Word]) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    for (i, w) in ws.iter().enumerate() {
        if keep.iter().any(|&k| is_subword(&ws[k], w)) {
            continue;
        }
        keep.retain(|&k| !is_subword(w, &ws[k]));
        keep.push(i);
    }
    keep.sort_unstable();
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.bytes().map(|c| (c - b'a') as Letter).collect()
    }

    fn rep(s: &str, n: usize) -> String {
        s.repeat(n)
    }

    fn wr(p: &str) -> Action {
        Action::write(w(p))
    }

    fn rd(p: &str) -> Action {
        Action::read(w(p))
    }

    /// Residual by enumerating suffixes, longest first.
    fn residual_oracle(x: &[Letter], v: &[Letter]) -> Word {
        for start in 0..=x.len() {
            if is_subword(&x[start..], v) {
                return x[..start].to_vec();
            }
        }
        unreachable!()
    }

    fn subword_oracle(u: &[Letter], v: &[Letter]) -> bool {
        subwords(v).contains(u)
    }

    fn ominus_oracle(x: &[Letter], u: &[Letter]) -> Option<Word> {
        match (x.split_first(), u.split_first()) {
            (_, None) => Some(x.to_vec()),
            (None, Some(_)) => None,
            (Some((a, x1)), Some((b, u1))) if a == b => ominus_oracle(x1, u1),
            (Some((_, x1)), Some(_)) => ominus_oracle(x1, u),
        }
    }

    #[test]
    fn subword_examples() {
        assert!(is_subword(&w("ab"), &w("axb")));
        assert!(is_subword(&[], &w("abc")));
        assert!(!is_subword(&w("aa"), &w("ab")));
    }

    #[test]
    fn residual_examples() {
        let x = w(&(rep("b", 4) + &rep("a", 4)));
        let v = w(&(String::from("a") + &rep("b", 5)));
        assert_eq!(residual(&x, &v), w(&(rep("b", 4) + &rep("a", 3))));
        assert_eq!(residual(&w("abc"), &[]), w("abc"));
        assert_eq!(residual(&[], &w("abc")), Vec::<Letter>::new());
        assert_eq!(residual(&w("abcb"), &w("cb")), w("ab"));
        assert_eq!(residual_oracle(&w("abcb"), &w("cb")), w("ab"));
    }

    #[test]
    fn ominus_examples() {
        // The four-case recursion drops the unmatched x before b.
        assert_eq!(ominus(&w("axb"), &w("ab")), Some(vec![]));
        assert_eq!(ominus(&w("abc"), &[]), Some(w("abc")));
        assert_eq!(ominus(&w("ab"), &w("ba")), None);
        assert_eq!(ominus(&w("abcab"), &w("b")), Some(w("cab")));
    }

    #[test]
    fn pr_examples() {
        let x = w("aaaa");
        let s = vec![wr("abbbbb"), rd("bbbb")];
        assert_eq!(pr(&s[1..], &x), w("bbbbaaaa"));
        assert_eq!(pr(&s, &x), w("bbbbaaa"));
        assert_eq!(pr(&[], &w("ab")), w("ab"));
        assert_eq!(pr(&[rd("a"), wr("aa")], &[]), w("a"));
    }

    #[test]
    fn sss_examples() {
        assert_eq!(sss(&[rd("a"), wr("b")], &w("b")), vec![w("b"), vec![], w("a")]);
        assert_eq!(sss(&[], &w("ab")), vec![w("ab")]);
    }

    #[test]
    fn lossy_step_examples() {
        let got = lossy_step(&w("a"), &wr("b")).unwrap();
        let want: BTreeSet<Word> = [w("ab"), w("a"), w("b"), vec![]].into_iter().collect();
        assert_eq!(got, want);
        let got = lossy_step(&w("ab"), &rd("a")).unwrap();
        let want: BTreeSet<Word> = [w("b"), vec![]].into_iter().collect();
        assert_eq!(got, want);
        assert!(lossy_step(&[], &rd("a")).unwrap().is_empty());
        assert!(lossy_step(&[0; 12], &wr("a")).is_none());
    }

    fn arb_word(max: usize) -> impl Strategy<Value = Word> {
        prop::collection::vec(0..3u16, 0..=max)
    }

    fn arb_action() -> impl Strategy<Value = Action> {
        (any::<bool>(), prop::collection::vec(0..3u16, 1..=2))
            .prop_map(|(r, p)| if r { Action::read(p) } else { Action::write(p) })
    }

    fn arb_seq(max: usize) -> impl Strategy<Value = Vec<Action>> {
        prop::collection::vec(arb_action(), 0..=max)
    }

    /// One-step predecessors of ↑x by brute force over words up to `len`.
    fn pre_oracle(s: &[Action], x: &[Letter], z: &[Letter]) -> bool {
        let mut cur: BTreeSet<Word> = [z.to_vec()].into_iter().collect();
        for a in s {
            let mut next = BTreeSet::new();
            for c in &cur {
                if let Some(succ) = lossy_step(c, a) {
                    next.extend(succ);
                }
            }
            cur = next;
        }
        cur.iter().any(|y| is_subword(x, y))
    }

    proptest! {
        #[test]
        fn subword_matches_enumeration(u in arb_word(4), v in arb_word(6)) {
            prop_assert_eq!(is_subword(&u, &v), subword_oracle(&u, &v));
        }

        #[test]
        fn residual_matches_suffix_search(x in arb_word(8), v in arb_word(8)) {
            prop_assert_eq!(residual(&x, &v), residual_oracle(&x, &v));
        }

        #[test]
        fn residual_composes(x in arb_word(8), v in arb_word(5), v2 in arb_word(5)) {
            let mut vv = v2.clone();
            vv.extend_from_slice(&v);
            prop_assert_eq!(residual(&residual(&x, &v), &v2), residual(&x, &vv));
        }

        #[test]
        fn residual_concatenation_laws(x in arb_word(5), x2 in arb_word(6), v in arb_word(5)) {
            let r = residual(&x2, &v);
            if !r.is_empty() {
                let mut xx = x.clone();
                xx.extend_from_slice(&x2);
                let mut lhs = x.clone();
                lhs.extend_from_slice(&r);
                prop_assert_eq!(lhs, residual(&xx, &v));
            }
            if x2.len() > v.len() {
                prop_assert!(!r.is_empty());
            }
        }

        #[test]
        fn ominus_matches_recursion(x in arb_word(8), u in arb_word(4)) {
            let got = ominus(&x, &u);
            prop_assert_eq!(got.is_some(), is_subword(&u, &x));
            prop_assert_eq!(got, ominus_oracle(&x, &u));
        }

        #[test]
        fn ominus_concatenation(x in arb_word(5), x2 in arb_word(4), u in arb_word(3)) {
            if let Some(r) = ominus(&x, &u) {
                let mut xx = x.clone();
                xx.extend_from_slice(&x2);
                let mut lhs = r;
                lhs.extend_from_slice(&x2);
                prop_assert_eq!(Some(lhs), ominus(&xx, &u));
            }
        }

        #[test]
        fn ominus_characterises_reads(x in arb_word(6), u in arb_word(3), y in arb_word(4)) {
            let mut uy = u.clone();
            uy.extend_from_slice(&y);
            let step = is_subword(&uy, &x);
            let via = ominus(&x, &u).map(|r| is_subword(&y, &r)).unwrap_or(false);
            prop_assert_eq!(step, via);
        }

        #[test]
        fn pr_is_monotone(s in arb_seq(4), x in arb_word(5), extra in arb_word(3), pos in 0usize..6) {
            let mut x2 = x.clone();
            for (k, c) in extra.into_iter().enumerate() {
                let at = (pos + k).min(x2.len());
                x2.insert(at, c);
            }
            prop_assert!(is_subword(&pr(&s, &x), &pr(&s, &x2)));
        }

        #[test]
        fn pr_characterises_predecessors(s in arb_seq(2), x in arb_word(3), z in arb_word(4)) {
            prop_assert_eq!(is_subword(&pr(&s, &x), &z), pre_oracle(&s, &x, &z));
        }

        #[test]
        fn sss_ends_with_pr(s in arb_seq(5), x in arb_word(6)) {
            let seq = sss(&s, &x);
            prop_assert_eq!(seq.len(), 2 * letter_pairs(&s).len() + 1);
            prop_assert_eq!(seq.last().unwrap(), &pr(&s, &x));
        }
    }

    #[test]
    fn minimize_keeps_first_minimal() {
        let ws = vec![w("ab"), w("b"), w("abc"), w("b"), w("c")];
        assert_eq!(minimize(&ws), vec![1, 4]);
    }
}

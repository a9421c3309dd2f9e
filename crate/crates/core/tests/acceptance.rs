//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails. Reference values come from small independent
//! implementations below, not from the library.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use flatlcm::acceleration::{self, OmegaResult};
use flatlcm::gen::*;
use flatlcm::machine::{normalize, rea, Action, Dir, Machine, Rule};
use flatlcm::oracle::{self, OracleConfig};
use flatlcm::slp::{self, Slp};
use flatlcm::solver::{parse_witness_json, validate_witness, witness_to_json, Query, Solver, Witness};
use flatlcm::words::{Letter, Word};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

// ---------------------------------------------------------------------------
// Reference implementations.

fn wd(s: &str) -> Word {
    s.bytes().map(|c| (c - b'a') as Letter).collect()
}

fn rep(s: &str, n: usize) -> Word {
    wd(&s.repeat(n))
}

fn sub(u: &[Letter], v: &[Letter]) -> bool {
    let mut it = v.iter();
    u.iter().all(|c| it.any(|d| d == c))
}

/// Shortest prefix of x whose removal leaves a subword of v.
fn resid(x: &[Letter], v: &[Letter]) -> Word {
    let (mut i, mut j) = (x.len(), v.len());
    while i > 0 {
        while j > 0 && v[j - 1] != x[i - 1] {
            j -= 1;
        }
        if j == 0 {
            break;
        }
        j -= 1;
        i -= 1;
    }
    x[..i].to_vec()
}

fn pr(s: &[Action], x: &[Letter]) -> Word {
    let mut y = x.to_vec();
    for a in s.iter().rev() {
        y = match a.dir {
            Dir::Read => a.payload.iter().chain(&y).copied().collect(),
            Dir::Write => resid(&y, &a.payload),
        };
    }
    y
}

/// Least L with some earlier iterate embedded in the (L+1)-th.
fn iteration_number(s: &[Action], x: &[Letter]) -> usize {
    let mut ys = vec![x.to_vec()];
    loop {
        let next = pr(s, ys.last().unwrap());
        if ys.iter().any(|y| sub(y, &next)) {
            return ys.len() - 1;
        }
        ys.push(next);
    }
}

fn power(v: &[Letter], len: usize) -> Word {
    v.iter().copied().cycle().take(len).collect()
}

fn one_loop_machine(letters: usize, s: Vec<Action>) -> Machine {
    Machine {
        name: "loop".into(),
        alphabet: (0..letters).map(|i| ((b'a' + i as u8) as char).to_string()).collect(),
        locations: vec!["q".into()],
        rules: vec![Rule { name: "r0".into(), from: 0, actions: normalize(s), to: 0 }],
        initial: Some(0),
    }
}

fn random_word(rng: &mut ChaCha8Rng, letters: u16, max: usize) -> Word {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| rng.gen_range(0..letters)).collect()
}

/// Random action sequence with at most `max_letters` letters in total.
fn random_seq(rng: &mut ChaCha8Rng, letters: u16, max_letters: usize) -> Vec<Action> {
    let mut left = rng.gen_range(0..=max_letters);
    let mut s = Vec::new();
    while left > 0 {
        let n = rng.gen_range(1..=left);
        left -= n;
        let payload = (0..n).map(|_| rng.gen_range(0..letters)).collect();
        s.push(if rng.gen_bool(0.5) { Action::read(payload) } else { Action::write(payload) });
    }
    s
}

// ---------------------------------------------------------------------------
// Harness.

type Outcome = Result<String, String>;

fn criterion(n: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let r = f();
    let el = t.elapsed();
    let (ok, detail) = match r {
        Ok(d) if el <= budget => (true, d),
        Ok(d) => (false, format!("{d}; took {el:.2?}, budget {budget:.0?}")),
        Err(e) => (false, e),
    };
    // Written to the raw handle so the line survives test output capture.
    let line = format!("{} {n}. {name}: {detail} [{el:.2?}]\n", if ok { "PASS" } else { "FAIL" });
    let _ = io::stdout().lock().write_all(line.as_bytes());
    ok
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Criteria.

fn example9_expected() -> Vec<Word> {
    let mut e = vec![rep("a", 4), wd("bbbbaaa"), [rep("b", 8), rep("a", 2)].concat(), [rep("b", 12), rep("a", 1)].concat()];
    for k in 4..=21usize {
        e.push(rep("b", 20usize.saturating_sub(k)));
    }
    e
}

fn example9() -> (Vec<Action>, Word) {
    (vec![Action::write(wd("abbbbb")), Action::read(wd("bbbb"))], rep("a", 4))
}

fn c1_example9() -> Outcome {
    let (s, x) = example9();
    let expected = example9_expected();
    ensure!(expected[4] == rep("b", 16) && expected[5] == rep("b", 15), "bad expectation table");
    let t = Instant::now();
    let seq = acceleration::pr_sequence(&s, &x, 21);
    let l = acceleration::iteration_number(&s, &x);
    let el = t.elapsed();
    ensure!(seq == expected, "pr sequence differs: {seq:?}");
    ensure!(l == 20, "iteration number {l}, expected 20");
    ensure!(el < Duration::from_millis(1), "took {el:?}");
    Ok(format!("y_0..y_21 exact, L = 20 in {el:.1?}"))
}

fn c2_iteration_bound() -> Outcome {
    for n in 1..=10 {
        for m in 1..=10 {
            let s = vec![Action::write([wd("a"), rep("b", n + 1)].concat()), Action::read(rep("b", n))];
            let x = rep("a", m);
            let l = acceleration::iteration_number(&s, &x);
            ensure!(l == m * (n + 1), "L = {l} for n = {n}, m = {m}");
            ensure!(iteration_number(&s, &x) == l, "reference disagrees at n = {n}, m = {m}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max_ratio = 0.0f64;
    for i in 0..100_000 {
        let letters = rng.gen_range(1..=3);
        let s = random_seq(&mut rng, letters, 10);
        let x = random_word(&mut rng, letters, 8);
        let l = acceleration::iteration_number(&s, &x);
        let bound = x.len() * (rea(&s).len() + 1);
        ensure!(l <= bound, "case {i}: L = {l} > {bound} for {s:?}, {x:?}");
        if i % 10 == 0 {
            ensure!(iteration_number(&s, &x) == l, "case {i}: reference disagrees for {s:?}, {x:?}");
        }
        if bound > 0 {
            max_ratio = max_ratio.max(l as f64 / bound as f64);
        }
    }
    Ok(format!("family exact for n, m ≤ 10; bound holds on 1e5 cases (max L/bound {max_ratio:.2})"))
}

fn c3_fig1() -> Outcome {
    let mut slowest = Duration::ZERO;
    for n in 2..=20usize {
        let (m, q) = gen_fig1(n);
        let t = Instant::now();
        let v = Solver::new(&m).map_err(|e| e.to_string())?.decide(&q).map_err(|e| e.to_string())?;
        let el = t.elapsed();
        slowest = slowest.max(el);
        ensure!(v.answer, "n = {n}: answered false");
        ensure!(el < Duration::from_secs(2), "n = {n}: took {el:?}");
        let w = v.witness.ok_or(format!("n = {n}: no witness"))?;
        validate_witness(&m, &q, &w).map_err(|e| format!("n = {n}: {e}"))?;
        for i in 1..=n {
            let s = &w.segments[i];
            ensure!(m.locations[s.location] == format!("q{i}"), "n = {n}: segment {i} at {}", m.locations[s.location]);
            ensure!(s.exponent == BigUint::from(1u64) << (i - 1), "n = {n}: q{i} exponent {}", s.exponent);
        }
        let (qn, next) = (&w.segments[n], &w.segments[n + 1]);
        let peak = slp::pr(&m.rules[qn.rule.unwrap()].actions, &next.content).map_err(|e| e.to_string())?;
        ensure!(peak.len() == (1u64 << n) + 1, "n = {n}: q_n content length {}", peak.len());
    }
    Ok(format!("n = 2..20 true, exponents 2^(i-1), |q_n content| = 2^n+1; slowest {slowest:.1?}"))
}

/// Random SLP with a bounded expansion, built from plain pieces, powers and
/// factors of earlier results.
fn random_slp(rng: &mut ChaCha8Rng, letters: u16, max_len: usize) -> (Slp, Word) {
    let mut acc = (Slp::empty(), Vec::new());
    for _ in 0..rng.gen_range(1..=4) {
        let room = max_len - acc.1.len();
        if room == 0 {
            break;
        }
        let piece = match rng.gen_range(0..4) {
            0 => {
                let w = random_word(rng, letters, room.min(8));
                (Slp::from_plain(&w), w)
            }
            1 | 2 => {
                let v = random_word(rng, letters, 3);
                let v = if v.is_empty() { vec![0] } else { v };
                let cap = if rng.gen_bool(0.1) { room } else { room.min(200) };
                let len = rng.gen_range(0..=cap);
                (Slp::power(&v, &BigUint::from(len)).unwrap(), power(&v, len))
            }
            _ => {
                let (s, w) = &acc;
                let i = rng.gen_range(0..=w.len());
                let j = rng.gen_range(i..=w.len().min(i + room));
                (s.factor(i as u64, j as u64).unwrap(), w[i..j].to_vec())
            }
        };
        acc = (acc.0.concat(&piece.0).unwrap(), [acc.1, piece.1].concat());
    }
    acc
}

fn c4_slp_differential() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases = [0u64; 6];
    let mut longest = 0;
    let big = |n: usize| BigUint::from(n);
    for i in 0..100_000 {
        let letters = rng.gen_range(1..=3);
        let max_len = if i % 50 == 0 { 10_000 } else { 600 };
        let (xs, x) = random_slp(&mut rng, letters, max_len);
        longest = longest.max(x.len());
        let v = random_word(&mut rng, letters, 3);
        let v = if v.is_empty() { vec![0] } else { v };

        // ⊑ against a power, with a length near the boundary half the time.
        let num = if rng.gen_bool(0.5) { rng.gen_range(0..=x.len() * v.len() + 3) } else { rng.gen_range(0..40) };
        ensure!(
            slp::subword_of_power(&xs, &v, &big(num)) == sub(&x, &power(&v, num)),
            "subword_of_power case {i}: {x:?} {v:?} {num}"
        );
        cases[0] += 1;

        let k = rng.gen_range(0..=x.len() / v.len() + 2);
        let r = slp::residual_power(&xs, &v, &big(k));
        ensure!(r.expand(20_000).unwrap() == resid(&x, &v.repeat(k)), "residual_power case {i}: {x:?} {v:?} {k}");
        cases[1] += 1;

        let s = random_seq(&mut rng, letters, 6);
        let k = rng.gen_range(0..=6);
        let mut y = x.clone();
        for _ in 0..k {
            y = pr(&s, &y);
        }
        if y.len() <= 20_000 {
            let p = slp::pr_iter(&s, &xs, &big(k)).map_err(|e| e.to_string())?;
            ensure!(p.len() == y.len() as u64 && p.expand(20_000).unwrap() == y, "pr_iter case {i}: {s:?} {x:?} {k}");
            cases[2] += 1;
        }

        // Matching, factor and concatenation.
        let (ys, y) = random_slp(&mut rng, letters, max_len);
        let a = rng.gen_range(0..=y.len());
        let b = rng.gen_range(a..=y.len().min(a + 30));
        let f = ys.factor(a as u64, b as u64).unwrap();
        ensure!(f.expand(100).unwrap() == y[a..b], "factor case {i}");
        let pat = if rng.gen_bool(0.5) { f } else { Slp::from_plain(&random_word(&mut rng, letters, 4)) };
        let pw = pat.expand(100).unwrap();
        let factor_ref = pw.is_empty() || y.windows(pw.len()).any(|win| win == pw.as_slice());
        ensure!(slp::is_factor(&pat, &ys, 1000).unwrap() == factor_ref, "is_factor case {i}: {pw:?} in {y:?}");
        ensure!(slp::is_prefix(&pat, &ys) == y.starts_with(&pw), "is_prefix case {i}");
        ensure!(slp::is_suffix(&pat, &ys) == y.ends_with(&pw), "is_suffix case {i}");
        ensure!(slp::equal(&xs, &ys) == (x == y), "equal case {i}");
        let c = xs.concat(&ys).unwrap();
        ensure!(c.len() == (x.len() + y.len()) as u64 && c.expand(40_000).unwrap() == [x.clone(), y.clone()].concat(), "concat case {i}");
        cases[3] += 1;

        let short = random_word(&mut rng, letters, 6);
        ensure!(slp::subword(&short, &ys) == sub(&short, &y), "subword case {i}");
        cases[4] += 1;
        let (ss, sw) = random_slp(&mut rng, letters, 12);
        ensure!(slp::subword_rev(&ss, &y) == sub(&sw, &y), "subword_rev case {i}: {sw:?} in {y:?}");
        cases[5] += 1;
    }
    let (s, x) = example9();
    let expected = example9_expected();
    for (k, e) in expected.iter().enumerate() {
        for input in [Slp::from_plain(&x), Slp::power(&wd("a"), &big(4)).unwrap()] {
            let p = slp::pr_iter(&s, &input, &big(k)).map_err(|e| e.to_string())?;
            ensure!(p.expand(100).unwrap() == *e, "pr_iter on the iteration example differs at k = {k}");
        }
    }
    Ok(format!(
        "cases: power ⊑ {}, residual {}, pr_iter {}, matching/factor/concat {}, subword {}, subword_rev {}; longest {longest}; iteration example reproduced",
        cases[0], cases[1], cases[2], cases[3], cases[4], cases[5]
    ))
}

struct Collected {
    witnesses: Vec<(Machine, Query, Witness)>,
}

fn c5_fuzz(out: &mut Collected) -> Outcome {
    let p = RandomParams::default();
    let cfg = OracleConfig::default();
    let (mut runs, mut conclusive, mut agree) = (0u32, 0u32, 0u32);
    for seed in 0..500u64 {
        let m = gen_random_flat(seed, &p);
        let s = Solver::new(&m).map_err(|e| format!("seed {seed}: {e}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let src = (0, random_word(&mut rng, 3, 3));
        let tgt = (rng.gen_range(0..m.locations.len()), random_word(&mut rng, 3, 3));
        let cyc: Vec<usize> = (0..m.locations.len()).filter(|&q| s.info.on_cycle(q)).collect();
        let rloc = if cyc.is_empty() { tgt.0 } else { cyc[rng.gen_range(0..cyc.len())] };
        let rtgt = (rloc, random_word(&mut rng, 3, 3));
        let queries = [
            (Query::reach(src.clone(), tgt.clone()), oracle::oracle_reach_exact(&m, &src, &tgt, &cfg)),
            (Query::cover(src.clone(), tgt.clone()), oracle::oracle_coverability(&m, &src, &tgt, &cfg)),
            (Query::nonterm(src.clone()), oracle::oracle_nonterm(&m, &src, &cfg)),
            (Query::unbounded(src.clone()), oracle::oracle_unbounded(&m, &src, &cfg)),
            (Query::repcov(src.clone(), rtgt.clone()), oracle::oracle_repcov(&m, &src, &rtgt, &cfg)),
        ];
        for (q, o) in queries {
            let v = s.decide(&q).map_err(|e| format!("seed {seed} {}: {e}", q.kind.name()))?;
            runs += 1;
            if let Some(b) = o.answer.conclusive() {
                conclusive += 1;
                ensure!(b == v.answer, "seed {seed} {}: solver {} oracle {b}\n{m}", q.kind.name(), v.answer);
                agree += 1;
            }
            if let Some(w) = v.witness {
                out.witnesses.push((m.clone(), q, w));
            }
        }
    }
    let rate = conclusive as f64 / runs as f64;
    ensure!(rate >= 0.8, "only {:.1}% of oracle runs conclusive", 100.0 * rate);
    Ok(format!("500 machines, {runs} queries, {conclusive} conclusive ({:.1}%), {agree} agree", 100.0 * rate))
}

fn check_sat(name: &str, c: &Cnf, (m, q): (Machine, Query), out: &mut Collected) -> Result<(), String> {
    let v = Solver::new(&m).map_err(|e| e.to_string())?.decide(&q).map_err(|e| e.to_string())?;
    ensure!(v.answer == c.satisfiable(), "{name}: answered {} on\n{}", v.answer, c.to_dimacs());
    if let Some(w) = v.witness {
        out.witnesses.push((m, q, w));
    }
    Ok(())
}

fn c6_sat(out: &mut Collected) -> Outcome {
    let mut sat = 0;
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + i);
        let c = gen_random_cnf(i, rng.gen_range(1..=8), rng.gen_range(1..=12));
        sat += c.satisfiable() as u32;
        check_sat("acyclic reach", &c, gen_acyclic_sat(&c, false), out)?;
        check_sat("acyclic liveness", &c, gen_acyclic_sat(&c, true), out)?;
        let no_marker = AcyclicSatOptions { liveness: false, end_marker: false };
        check_sat("acyclic without $", &c, gen_acyclic_sat_with(&c, no_marker), out)?;
    }
    let mut sat_sp = 0;
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + i);
        let c = gen_random_cnf(10_000 + i, rng.gen_range(1..=2), rng.gen_range(1..=12));
        sat_sp += c.satisfiable() as u32;
        check_sat("single-path", &c, gen_singlepath_sat(&c), out)?;
    }
    Ok(format!(
        "acyclic (reach, liveness, no end marker): 200 CNFs ≤ 8 vars ≤ 12 clauses, {sat} sat; single-path: 200 CNFs ≤ 2 vars ≤ 12 clauses, {sat_sp} sat"
    ))
}

/// Single-field mutations at the first and last segment and at up to three
/// others picked at random.
fn mutations(m: &Machine, w: &Witness, rng: &mut ChaCha8Rng) -> Vec<(String, Value)> {
    let j = witness_to_json(m, w);
    let nseg = w.segments.len();
    let mut sites = vec![0, nseg - 1];
    for _ in 0..3 {
        sites.push(rng.gen_range(0..nseg));
    }
    sites.sort_unstable();
    sites.dedup();
    let mut out = Vec::new();
    for i in sites {
        let mut up = j.clone();
        let e: BigUint = w.segments[i].exponent.clone();
        up["segments"][i]["exponent"] = Value::String((&e + 1u32).to_string());
        out.push((format!("exponent+1 at {i}"), up));
        if e > BigUint::from(0u32) {
            let mut down = j.clone();
            down["segments"][i]["exponent"] = Value::String((e - 1u32).to_string());
            out.push((format!("exponent-1 at {i}"), down));
        }
        let mut drop = j.clone();
        drop["segments"].as_array_mut().unwrap().remove(i);
        out.push((format!("dropped segment {i}"), drop));
        let grammar = j["segments"][i]["slp_grammar"].as_str().unwrap();
        let lines: Vec<&str> = grammar.lines().collect();
        if let Some(pos) = lines.iter().position(|l| l.split_whitespace().count() == 3) {
            let toks: Vec<&str> = lines[pos].split_whitespace().collect();
            let cur = m.alphabet.iter().position(|a| a == toks[2]).unwrap();
            if m.alphabet.len() > 1 {
                let other = &m.alphabet[(cur + 1) % m.alphabet.len()];
                let mut new_lines: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
                new_lines[pos] = format!("{} -> {}", toks[0], other);
                let mut leaf = j.clone();
                leaf["segments"][i]["slp_grammar"] = Value::String(new_lines.join("\n") + "\n");
                out.push((format!("perturbed leaf at {i}"), leaf));
            }
        }
    }
    out
}

fn c7_witnesses(collected: &mut Collected) -> Outcome {
    for n in 2..=12 {
        let (m, q) = gen_fig1(n);
        let v = Solver::new(&m).unwrap().decide(&q).map_err(|e| e.to_string())?;
        collected.witnesses.push((m, q, v.witness.ok_or("fig1 without witness")?));
    }
    for seed in 0..200u64 {
        let m = gen_random_flat(seed, &RandomParams::default());
        let s = Solver::new(&m).unwrap();
        let fair: Vec<usize> = (0..m.locations.len()).filter(|q| q % 2 == 1).collect();
        let q = Query::buchi((0, vec![]), fair);
        if let Some(w) = s.decide(&q).map_err(|e| e.to_string())?.witness {
            collected.witnesses.push((m, q, w));
        }
    }
    let (mut ok, mut rejected, mut total_mut) = (0, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (m, q, w) in &collected.witnesses {
        validate_witness(m, q, w).map_err(|e| format!("emitted witness rejected: {e} for {}\n{m}", q.kind.name()))?;
        let back = parse_witness_json(m, &witness_to_json(m, w)).map_err(|e| e.to_string())?;
        validate_witness(m, q, &back).map_err(|e| format!("JSON round trip rejected: {e}"))?;
        ok += 1;
        for (what, j) in mutations(m, w, &mut rng) {
            total_mut += 1;
            let accepted = parse_witness_json(m, &j).is_ok_and(|mw| validate_witness(m, q, &mw).is_ok());
            ensure!(!accepted, "mutation `{what}` accepted for {} on\n{m}", q.kind.name());
            rejected += 1;
        }
    }
    Ok(format!("{ok}/{ok} witnesses valid (also after JSON round trip); {rejected}/{total_mut} mutations rejected"))
}

fn c8_liveness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut words, mut bottoms) = (0, 0);
    for i in 0..10_000 {
        let letters = rng.gen_range(1..=3);
        let s = random_seq(&mut rng, letters, 8);
        match acceleration::pr_omega(&s) {
            OmegaResult::Word(y) => {
                ensure!(pr(&s, &y) == y, "case {i}: pr_omega {y:?} is not a fixpoint of {s:?}");
                words += 1;
            }
            OmegaResult::Bottom => {
                let mut y = Vec::new();
                for _ in 0..rea(&s).len() + 2 {
                    let next = pr(&s, &y);
                    ensure!(next != y && sub(&y, &next), "case {i}: Bottom but iteration stalls for {s:?}");
                    y = next;
                }
                bottoms += 1;
            }
        }
    }

    // Every σ of at most 4 single-letter actions over {a, b}, every x with
    // |x| ≤ 4.
    let cfg = OracleConfig { channel_bound: 16, ..OracleConfig::default() };
    let mut seqs: Vec<Vec<Action>> = vec![vec![]];
    let mut frontier = seqs.clone();
    for _ in 0..4 {
        let mut next = Vec::new();
        for s in &frontier {
            for (dir, c) in [(Dir::Read, 0), (Dir::Read, 1), (Dir::Write, 0), (Dir::Write, 1)] {
                let mut t = s.clone();
                t.push(Action { dir, payload: vec![c] });
                next.push(t);
            }
        }
        seqs.extend(next.iter().cloned());
        frontier = next;
    }
    let mut xs: Vec<Word> = vec![vec![]];
    for len in 1..=4u32 {
        for bits in 0..1u32 << len {
            xs.push((0..len).map(|i| (bits >> i & 1) as Letter).collect());
        }
    }
    let (mut checked, mut inconclusive) = (0, 0);
    for s in &seqs {
        let m = one_loop_machine(2, s.clone());
        let solver = Solver::new(&m).unwrap();
        let omega = acceleration::pr_omega(s);
        for x in &xs {
            let predicted = matches!(&omega, OmegaResult::Word(y) if sub(y, x));
            let src = (0, x.clone());
            match oracle::oracle_nonterm(&m, &src, &cfg).answer.conclusive() {
                Some(b) => {
                    ensure!(b == predicted, "σ = {s:?}, x = {x:?}: oracle {b}, pr_omega predicts {predicted}");
                    checked += 1;
                }
                None => inconclusive += 1,
            }
            let v = solver.decide(&Query::nonterm(src)).map_err(|e| e.to_string())?;
            ensure!(v.answer == predicted, "σ = {s:?}, x = {x:?}: solver {}", v.answer);
        }
    }
    ensure!(inconclusive == 0, "{inconclusive} oracle runs inconclusive");
    Ok(format!(
        "fixpoint law on 1e4 σ ({words} values, {bottoms} ⊥); infinite-iteration criterion matches oracle on {} σ × {} x = {checked} pairs",
        seqs.len(),
        xs.len()
    ))
}

#[test]
fn acceptance() {
    let mut collected = Collected { witnesses: Vec::new() };
    let results = [
        criterion(1, "iteration example", Duration::from_millis(50), c1_example9),
        criterion(2, "iteration-number family and bound", Duration::from_secs(10), c2_iteration_bound),
        criterion(3, "exponential witness family", Duration::from_secs(40), c3_fig1),
        criterion(4, "SLP differential suite", Duration::from_secs(60), c4_slp_differential),
        criterion(5, "solver vs oracle fuzzing", Duration::from_secs(300), || c5_fuzz(&mut collected)),
        criterion(6, "SAT reductions", Duration::from_secs(300), || c6_sat(&mut collected)),
        criterion(7, "witness integrity", Duration::from_secs(60), || c7_witnesses(&mut collected)),
        criterion(8, "liveness fixpoints", Duration::from_secs(60), c8_liveness),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

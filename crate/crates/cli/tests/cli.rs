use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::io::Write;

use serde_json::Value;
use tempfile::TempDir;

fn flatlcm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatlcm")).args(args).current_dir(dir).output().expect("spawn flatlcm")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fig1(dir: &Path, n: usize) {
    let o = flatlcm(&["gen", "fig1", &n.to_string(), "-o", "m.lcm", "--query-out", "q.json"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fig1_reach_succeeds() {
    let d = TempDir::new().unwrap();
    fig1(d.path(), 4);
    let o = flatlcm(&["reach", "m.lcm", "--query", "q.json"], d.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("true"));
    let o = flatlcm(&["reach", "m.lcm", "--from", "q0:", "--to", "q'0:a"], d.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn emitted_witness_validates_and_tampering_is_caught() {
    let d = TempDir::new().unwrap();
    fig1(d.path(), 5);
    let o = flatlcm(&["reach", "m.lcm", "--query", "q.json", "--emit-witness"], d.path());
    assert_eq!(code(&o), 0);
    fs::write(d.path().join("w.json"), &o.stdout).unwrap();
    assert_eq!(code(&flatlcm(&["validate", "m.lcm", "q.json", "w.json"], d.path())), 0);

    // Validation from stdin.
    let mut child = Command::new(env!("CARGO_BIN_EXE_flatlcm"))
        .args(["validate", "m.lcm", "q.json", "-"])
        .current_dir(d.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&o.stdout).unwrap();
    assert_eq!(child.wait().unwrap().code(), Some(0));

    let mut w: Value = serde_json::from_slice(&o.stdout).unwrap();
    let segs = w["segments"].as_array_mut().unwrap();
    let k = segs.iter().position(|s| s["exponent"] != "0" && s["exponent"] != 0).unwrap();
    let e = &mut segs[k]["exponent"];
    *e = match e {
        Value::String(s) => Value::String((s.parse::<u64>().unwrap() + 1).to_string()),
        Value::Number(n) => Value::from(n.as_u64().unwrap() + 1),
        _ => panic!("unexpected exponent {e}"),
    };
    fs::write(d.path().join("bad.json"), serde_json::to_vec(&w).unwrap()).unwrap();
    let o = flatlcm(&["validate", "m.lcm", "q.json", "bad.json"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("rejected"));
}

#[test]
fn verdict_json_round_trips_through_validate() {
    let d = TempDir::new().unwrap();
    fig1(d.path(), 3);
    let o = flatlcm(&["unbounded", "m.lcm", "--json"], d.path());
    assert_eq!(code(&o), 0);
    fs::write(d.path().join("v.json"), &o.stdout).unwrap();
    assert_eq!(code(&flatlcm(&["validate", "m.lcm", "v.json", "v.json"], d.path())), 0);
}

#[test]
fn sat_acyclic_generation_round_trip() {
    let d = TempDir::new().unwrap();
    for seed in 0..6 {
        let o = flatlcm(&["gen", "cnf", "--seed", &seed.to_string(), "--vars", "4", "--clauses", "10", "-o", "c.cnf"], d.path());
        assert_eq!(code(&o), 0);
        let cnf = flatlcm::gen::parse_dimacs(&fs::read_to_string(d.path().join("c.cnf")).unwrap()).unwrap();
        let o = flatlcm(&["gen", "sat-acyclic", "c.cnf", "-o", "m.lcm", "--query-out", "q.json"], d.path());
        assert_eq!(code(&o), 0);
        let o = flatlcm(&["reach", "m.lcm", "--query", "q.json"], d.path());
        let want = if cnf.satisfiable() { 0 } else { 1 };
        assert_eq!(code(&o), want, "seed {seed}");
    }
}

#[test]
fn non_flat_machine_exits_3() {
    let d = TempDir::new().unwrap();
    let text = "machine twin\nalphabet a\nloc p init\nrule r : p -> p : !a\nrule s : p -> p : ?a\n";
    fs::write(d.path().join("m.lcm"), text).unwrap();
    assert_eq!(code(&flatlcm(&["check-flat", "m.lcm"], d.path())), 3);
    let o = flatlcm(&["nonterm", "m.lcm"], d.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not flat"));
}

#[test]
fn parse_and_usage_errors_exit_2() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("m.lcm"), "machine broken\nalphabet a\nrule r : p -> q : !z\n").unwrap();
    assert_eq!(code(&flatlcm(&["nonterm", "m.lcm"], d.path())), 2);
    assert_eq!(code(&flatlcm(&["nonterm", "missing.lcm"], d.path())), 2);
    fig1(d.path(), 2);
    assert_eq!(code(&flatlcm(&["reach", "m.lcm", "--to", "nowhere:"], d.path())), 2);
    assert_eq!(code(&flatlcm(&["reach", "m.lcm"], d.path())), 2);
    assert_eq!(code(&flatlcm(&["frobnicate"], d.path())), 2);
}

#[test]
fn json_output_keys() {
    let d = TempDir::new().unwrap();
    fig1(d.path(), 3);
    let o = flatlcm(&["reach", "m.lcm", "--query", "q.json", "--json"], d.path());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let keys = |v: &Value| {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    assert!(["answer", "query", "stats", "witness"].iter().all(|k| keys(&v).contains(&k.to_string())), "{:?}", keys(&v));
    let w = &v["witness"];
    assert_eq!(keys(w), ["certificate", "final", "segments"]);
    assert_eq!(keys(&w["segments"][0]), ["exponent", "location", "rule_id", "slp_grammar", "slp_len"]);
    assert_eq!(keys(&v["query"])[..2], ["kind", "source"]);

    let o = flatlcm(&["check-flat", "m.lcm", "--json"], d.path());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(keys(&v), ["cycles", "flat"]);

    let o = flatlcm(&["oracle", "reach", "m.lcm", "--to", "q'0:", "--json"], d.path());
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(keys(&v), ["answer", "trace"]);
}

#[test]
fn generators_are_deterministic() {
    let d = TempDir::new().unwrap();
    let a = flatlcm(&["gen", "random", "--seed", "9"], d.path());
    let b = flatlcm(&["gen", "random", "--seed", "9"], d.path());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    fs::write(d.path().join("r.lcm"), &a.stdout).unwrap();
    assert_eq!(code(&flatlcm(&["check-flat", "r.lcm"], d.path())), 0);
}

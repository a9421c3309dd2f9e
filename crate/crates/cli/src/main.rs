//! `flatlcm`: decide reachability and liveness questions on flat lossy
//! channel machines, generate benchmark machines, and check witnesses.
//!
//! Exit status: 0 when the answer is true (or the witness is accepted),
//! 1 when it is false (or rejected), 2 on usage or parse errors, 3 when the
//! machine is not flat or the oracle is inconclusive.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flatlcm::gen::{
    gen_acyclic_sat_with, gen_fig1, gen_random_cnf, gen_random_flat, gen_singlepath_sat_with, parse_dimacs,
    AcyclicSatOptions, RandomParams, SinglePathOptions,
};
use flatlcm::machine::{analyze_flatness, parse_machine};
use flatlcm::oracle::{self, Answer, OracleConfig};
use flatlcm::slp::Slp;
use flatlcm::solver::{
    parse_witness_json, validate_witness, verdict_to_json, witness_to_json, Query, QueryKind, Solver, SolverError,
    Verdict,
};
use flatlcm::{LocationId, Machine, Word};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "flatlcm", version, about = "Verification of flat single-channel lossy channel machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that every location lies on at most one elementary cycle.
    CheckFlat {
        machine: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Exact reachability of the target configuration.
    Reach(TargetArgs),
    /// Reachability of some configuration covering the target.
    Cover(TargetArgs),
    /// Existence of an infinite run.
    Nonterm(SourceArgs),
    /// Existence of a run visiting the fair set infinitely often.
    Buchi(BuchiArgs),
    /// Infiniteness of the reachability set.
    Unbounded(SourceArgs),
    /// A run visiting the target location infinitely often, each time with
    /// a channel covering the target word.
    Repcov(TargetArgs),
    /// Write a generated machine in the text format.
    Gen(GenArgs),
    /// Answer a query by bounded explicit exploration.
    Oracle(OracleArgs),
    /// Re-check a witness against a machine and query.
    Validate {
        machine: PathBuf,
        /// Query JSON (as written by `gen --query-out` or found in a verdict).
        query: PathBuf,
        /// Witness JSON, a verdict containing one, or `-` for stdin.
        witness: PathBuf,
    },
}

#[derive(Args, Clone)]
struct Output {
    /// Print the verdict as JSON.
    #[arg(long)]
    json: bool,
    /// Print only the witness JSON (`null` when the answer is false).
    #[arg(long)]
    emit_witness: bool,
    /// Longest channel content printed in full in human-readable output.
    #[arg(long, default_value_t = 256)]
    expand_limit: u64,
}

#[derive(Args, Clone)]
struct SourceArgs {
    machine: PathBuf,
    /// Source configuration `location:word` (default: initial location,
    /// empty channel).
    #[arg(long)]
    from: Option<String>,
    /// Read the query from a JSON file instead.
    #[arg(long, conflicts_with_all = ["from"])]
    query: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Clone)]
struct TargetArgs {
    #[command(flatten)]
    src: SourceArgs,
    /// Target configuration `location:word`.
    #[arg(long, required_unless_present = "query")]
    to: Option<String>,
}

#[derive(Args, Clone)]
struct BuchiArgs {
    #[command(flatten)]
    src: SourceArgs,
    /// Comma-separated fair locations.
    #[arg(long, value_delimiter = ',', required_unless_present = "query")]
    fair: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    family: Family,
    /// Output file for the machine (stdout when absent).
    #[arg(short = 'o', long, global = true)]
    output: Option<PathBuf>,
    /// Also write the associated query as JSON.
    #[arg(long, global = true)]
    query_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Family {
    /// Doubling/halving machine whose runs need exponentially long contents.
    Fig1 { n: usize },
    /// Acyclic machine reaching its final location iff the CNF is satisfiable.
    SatAcyclic {
        cnf: PathBuf,
        /// Loop on the final location and ask for nontermination.
        #[arg(long)]
        liveness: bool,
        /// Drop the end marker after the valuation.
        #[arg(long)]
        no_end_marker: bool,
    },
    /// Machine whose control graph is a single line with self-loops.
    SatSinglepath {
        cnf: PathBuf,
        /// Alternate between two copies of the alphabet.
        #[arg(long)]
        colours: bool,
        #[arg(long)]
        liveness: bool,
    },
    /// Seed-deterministic random flat machine.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        locations: usize,
        #[arg(long, default_value_t = 3)]
        letters: usize,
        #[arg(long, default_value_t = 8)]
        max_rules: usize,
    },
    /// Seed-deterministic random 3CNF in DIMACS format.
    Cnf {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        vars: usize,
        #[arg(long)]
        clauses: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Reach,
    Cover,
    Nonterm,
    Buchi,
    Unbounded,
    Repcov,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleMode {
    /// Every lossy successor.
    Full,
    /// Only the largest successor of each step.
    Maximal,
}

#[derive(Args)]
struct OracleArgs {
    kind: OracleKind,
    machine: PathBuf,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long, value_delimiter = ',')]
    fair: Vec<String>,
    /// Longest channel content explored.
    #[arg(long, default_value_t = 10)]
    bound: usize,
    /// Most configurations explored.
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = OracleMode::Maximal)]
    mode: OracleMode,
    #[arg(long)]
    json: bool,
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let code = if matches!(e, SolverError::NotFlat(..)) { 3 } else { 2 };
        Failure { code, msg: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("flatlcm: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::CheckFlat { machine, json } => check_flat(&machine, json),
        Command::Reach(a) => decide(QueryKind::ReachExact, &a.src, a.to.as_deref(), &[]),
        Command::Cover(a) => decide(QueryKind::Coverability, &a.src, a.to.as_deref(), &[]),
        Command::Repcov(a) => decide(QueryKind::Repcov, &a.src, a.to.as_deref(), &[]),
        Command::Nonterm(a) => decide(QueryKind::Nonterm, &a, None, &[]),
        Command::Unbounded(a) => decide(QueryKind::Unbounded, &a, None, &[]),
        Command::Buchi(a) => decide(QueryKind::Buchi, &a.src, None, &a.fair),
        Command::Gen(g) => generate(g),
        Command::Oracle(o) => run_oracle(o),
        Command::Validate { machine, query, witness } => validate(&machine, &query, &witness),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| usage(format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    serde_json::from_str(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_machine(path: &Path) -> Result<Machine, Failure> {
    parse_machine(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| usage(format!("stdout: {e}"))),
    }
}

fn config(m: &Machine, text: Option<&str>) -> Result<(LocationId, Word), Failure> {
    match text {
        Some(t) => m.parse_config(t).map_err(usage),
        None => {
            let q = m.initial.ok_or_else(|| usage("machine has no initial location; pass --from"))?;
            Ok((q, Vec::new()))
        }
    }
}

fn locations(m: &Machine, names: &[String]) -> Result<Vec<LocationId>, Failure> {
    names.iter().map(|n| m.location(n).ok_or_else(|| usage(format!("unknown location `{n}`")))).collect()
}

fn check_flat(path: &Path, json: bool) -> Result<u8, Failure> {
    let m = load_machine(path)?;
    let info = analyze_flatness(&m);
    let rule_names = |rs: &[usize]| rs.iter().map(|&r| m.rules[r].name.clone()).collect::<Vec<_>>();
    let cycles: Vec<Vec<String>> = info.cycle_list.iter().map(|c| rule_names(c)).collect();
    if json {
        let mut v = json!({ "flat": info.is_flat, "cycles": cycles });
        if let Some((a, b)) = &info.offending {
            v["offending"] = json!([rule_names(a), rule_names(b)]);
        }
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
    } else if let Some((a, b)) = &info.offending {
        println!("not flat: cycles {} and {} share a location", rule_names(a).join(","), rule_names(b).join(","));
    } else {
        println!("flat, {} cycle(s)", cycles.len());
        for c in &cycles {
            println!("  {}", c.join(" "));
        }
    }
    Ok(if info.is_flat { 0 } else { 3 })
}

fn decide(kind: QueryKind, a: &SourceArgs, to: Option<&str>, fair: &[String]) -> Result<u8, Failure> {
    let m = load_machine(&a.machine)?;
    let q = match &a.query {
        Some(p) => {
            let q = Query::from_json(&m, &read_json(p)?).map_err(usage)?;
            if q.kind != kind {
                return Err(usage(format!("query file asks for {}, not {}", q.kind.name(), kind.name())));
            }
            q
        }
        None => Query {
            kind,
            source: config(&m, a.from.as_deref())?,
            target: to.map(|t| config(&m, Some(t))).transpose()?,
            fair_set: locations(&m, fair)?,
        },
    };
    let v = Solver::new(&m)?.decide(&q)?;
    if a.out.emit_witness {
        let w = v.witness.as_ref().map_or(Value::Null, |w| witness_to_json(&m, w));
        println!("{}", serde_json::to_string_pretty(&w).expect("json"));
    } else if a.out.json {
        println!("{}", serde_json::to_string_pretty(&verdict_to_json(&m, &q, &v)).expect("json"));
    } else {
        print_human(&m, &q, &v, a.out.expand_limit);
    }
    Ok(if v.answer { 0 } else { 1 })
}

fn show_content(m: &Machine, s: &Slp, limit: u64) -> String {
    if s.len() <= limit {
        let w = s.expand(limit).expect("within limit");
        if w.is_empty() {
            "ε".into()
        } else {
            m.format_word(&w)
        }
    } else {
        format!("<{} letters, grammar of {} rules>", s.len(), s.size())
    }
}

fn print_human(m: &Machine, q: &Query, v: &Verdict, limit: u64) {
    let src = m.format_config(q.source.0, &q.source.1);
    let what = match &q.target {
        Some((t, w)) => format!("{} {src} -> {}", q.kind.name(), m.format_config(*t, w)),
        None => format!("{} from {src}", q.kind.name()),
    };
    println!("{what}: {}", v.answer);
    let Some(w) = &v.witness else {
        println!("({} states, {:.1} ms)", v.stats.states, v.stats.wall_time_ms);
        return;
    };
    println!("witness ({} segments):", w.segments.len());
    for s in &w.segments {
        let rule = s.rule.map(|r| format!(" --{}-->", m.rules[r].name)).unwrap_or_default();
        println!(
            "  {} [{}] x{}{rule}",
            m.locations[s.location],
            show_content(m, &s.content, limit),
            s.exponent
        );
    }
    println!("  final channel covers {}", show_content(m, &Slp::from_plain(&w.target), limit));
    if let Some(c) = &w.certificate {
        println!("  then loops at {}", m.locations[c.location]);
        if let Some(e) = &c.embedding {
            println!("  cycle is increasing (embedding of {} positions)", e.len());
        }
        if !c.constraints.is_empty() {
            let cs: Vec<String> = c.constraints.iter().map(|y| show_content(m, &Slp::from_plain(y), limit)).collect();
            println!("  channel stays above each of: {}", cs.join(", "));
        }
    }
    println!("({} states, {:.1} ms)", v.stats.states, v.stats.wall_time_ms);
}

fn generate(g: GenArgs) -> Result<u8, Failure> {
    let load_cnf = |p: &Path| parse_dimacs(&read_text(p)?).map_err(|e| usage(format!("{}: {e}", p.display())));
    let (m, q) = match g.family {
        Family::Fig1 { n } => {
            if n == 0 {
                return Err(usage("fig1 needs n >= 1"));
            }
            gen_fig1(n)
        }
        Family::SatAcyclic { cnf, liveness, no_end_marker } => {
            let opts = AcyclicSatOptions { liveness, end_marker: !no_end_marker };
            gen_acyclic_sat_with(&load_cnf(&cnf)?, opts)
        }
        Family::SatSinglepath { cnf, colours, liveness } => {
            gen_singlepath_sat_with(&load_cnf(&cnf)?, SinglePathOptions { colours, liveness })
        }
        Family::Random { seed, locations, letters, max_rules } => {
            if locations == 0 || letters == 0 || letters > 26 {
                return Err(usage("need at least one location and between 1 and 26 letters"));
            }
            let p = RandomParams { locations, letters, max_rules, ..RandomParams::default() };
            let m = gen_random_flat(seed, &p);
            let q = Query::nonterm((0, Vec::new()));
            (m, q)
        }
        Family::Cnf { seed, vars, clauses } => {
            if vars == 0 {
                return Err(usage("need at least one variable"));
            }
            write_out(g.output.as_deref(), &gen_random_cnf(seed, vars, clauses).to_dimacs())?;
            return Ok(0);
        }
    };
    write_out(g.output.as_deref(), &m.to_string())?;
    if let Some(p) = &g.query_out {
        let text = serde_json::to_string_pretty(&q.to_json(&m)).expect("json") + "\n";
        write_out(Some(p), &text)?;
    }
    Ok(0)
}

fn run_oracle(o: OracleArgs) -> Result<u8, Failure> {
    let m = load_machine(&o.machine)?;
    let cfg = OracleConfig {
        channel_bound: o.bound,
        step_bound: o.steps,
        mode: match o.mode {
            OracleMode::Full => oracle::Mode::FullLossy,
            OracleMode::Maximal => oracle::Mode::MaximalContent,
        },
    };
    let src = config(&m, o.from.as_deref())?;
    let target = || -> Result<_, Failure> {
        let t = o.to.as_deref().ok_or_else(|| usage("this query needs --to"))?;
        config(&m, Some(t))
    };
    let v = match o.kind {
        OracleKind::Reach => oracle::oracle_reach_exact(&m, &src, &target()?, &cfg),
        OracleKind::Cover => oracle::oracle_coverability(&m, &src, &target()?, &cfg),
        OracleKind::Nonterm => oracle::oracle_nonterm(&m, &src, &cfg),
        OracleKind::Buchi => oracle::oracle_buchi(&m, &src, &locations(&m, &o.fair)?, &cfg),
        OracleKind::Unbounded => oracle::oracle_unbounded(&m, &src, &cfg),
        OracleKind::Repcov => oracle::oracle_repcov(&m, &src, &target()?, &cfg),
    };
    let answer = match v.answer {
        Answer::True => "true",
        Answer::False => "false",
        Answer::Inconclusive => "inconclusive",
    };
    let trace: Option<Vec<String>> =
        v.trace.as_ref().map(|t| t.iter().map(|(q, w)| m.format_config(*q, w)).collect());
    if o.json {
        println!("{}", serde_json::to_string_pretty(&json!({"answer": answer, "trace": trace})).expect("json"));
    } else {
        println!("{answer}");
        for c in trace.iter().flatten() {
            println!("  {c}");
        }
    }
    Ok(match v.answer {
        Answer::True => 0,
        Answer::False => 1,
        Answer::Inconclusive => 3,
    })
}

fn validate(machine: &Path, query: &Path, witness: &Path) -> Result<u8, Failure> {
    let m = load_machine(machine)?;
    let qv = read_json(query)?;
    // Accept a bare query or a verdict envelope.
    let qv = if qv.get("query").is_some() { qv["query"].clone() } else { qv };
    let q = Query::from_json(&m, &qv).map_err(usage)?;
    let wv = read_json(witness)?;
    let wv = if wv.get("witness").is_some() { wv["witness"].clone() } else { wv };
    if wv.is_null() {
        println!("rejected: no witness");
        return Ok(1);
    }
    let checked = parse_witness_json(&m, &wv).and_then(|w| validate_witness(&m, &q, &w));
    match checked {
        Ok(()) => {
            println!("accepted");
            Ok(0)
        }
        Err(e) => {
            println!("rejected: {e}");
            Ok(1)
        }
    }
}

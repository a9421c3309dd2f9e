//! Machine model, the line-based text format, and flatness analysis.
//!
//! Text format (`#` starts a comment):
//!
//! ```text
//! machine <name>
//! alphabet <letter> <letter> ...
//! loc <id> [init] <id> ...
//! rule [<rule-id> :] <from> -> <to> : <action> <action> ...
//! ```
//!
//! An action is `!<word>` or `?<word>`; a lone `.` is the empty action list.
//! A word is a concatenation of single-character letters (`!ab`), or a
//! comma-separated list of letter names when letters are longer than one
//! character (`!v1,0,v2,0`). `.` denotes the empty word. Rules without an
//! explicit id are named `r<index>`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::words::{Letter, Word};

pub type LocationId = usize;
pub type RuleId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Dir {
    Write,
    Read,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub dir: Dir,
    pub payload: Word,
}

impl Action {
    pub fn write(payload: Word) -> Self {
        Action { dir: Dir::Write, payload }
    }

    pub fn read(payload: Word) -> Self {
        Action { dir: Dir::Read, payload }
    }
}

/// Sequence of channel actions. Actions with an empty payload are dropped on
/// construction through [`normalize`].
pub type ActionSeq = Vec<Action>;

pub fn normalize(seq: ActionSeq) -> ActionSeq {
    seq.into_iter().filter(|a| !a.payload.is_empty()).collect()
}

/// Concatenation of the write payloads.
pub fn wri(seq: &[Action]) -> Word {
    seq.iter()
        .filter(|a| a.dir == Dir::Write)
        .flat_map(|a| a.payload.iter().copied())
        .collect()
}

/// Concatenation of the read payloads.
pub fn rea(seq: &[Action]) -> Word {
    seq.iter()
        .filter(|a| a.dir == Dir::Read)
        .flat_map(|a| a.payload.iter().copied())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub from: LocationId,
    pub actions: ActionSeq,
    pub to: LocationId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Machine {
    pub name: String,
    pub alphabet: Vec<String>,
    pub locations: Vec<String>,
    pub rules: Vec<Rule>,
    pub initial: Option<LocationId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("line {line}: unknown letter `{token}`")]
    UnknownLetter { line: usize, token: String },
    #[error("line {line}: unknown location `{token}`")]
    UnknownLocation { line: usize, token: String },
    #[error("line {line}: duplicate {what} `{token}`")]
    Duplicate { line: usize, what: &'static str, token: String },
    #[error("{0}")]
    Missing(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("unknown letter `{0}`")]
    UnknownLetter(String),
}

fn valid_letter_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || ",.#!?:".contains(c))
}

fn valid_location_name(s: &str) -> bool {
    !s.is_empty()
        && s != "init"
        && s != "->"
        && !s.chars().any(|c| c.is_whitespace() || "#:".contains(c))
}

impl Machine {
    pub fn location(&self, name: &str) -> Option<LocationId> {
        self.locations.iter().position(|l| l == name)
    }

    pub fn letter(&self, name: &str) -> Option<Letter> {
        self.alphabet.iter().position(|l| l == name).map(|i| i as Letter)
    }

    pub fn rule_by_name(&self, name: &str) -> Option<RuleId> {
        self.rules.iter().position(|r| r.name == name)
    }

    /// True when every letter name is a single character, so words can be
    /// printed without separators.
    fn compact_letters(&self) -> bool {
        self.alphabet.iter().all(|l| l.chars().count() == 1)
    }

    /// Parse a word written in the machine syntax (`.` is the empty word).
    pub fn parse_word(&self, text: &str) -> Result<Word, WordError> {
        let text = text.trim();
        if text.is_empty() || text == "." {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for seg in text.split(',') {
            if seg.is_empty() {
                continue;
            }
            if let Some(l) = self.letter(seg) {
                out.push(l);
                continue;
            }
            for c in seg.chars() {
                let mut buf = [0u8; 4];
                let name: &str = c.encode_utf8(&mut buf);
                match self.letter(name) {
                    Some(l) => out.push(l),
                    None => return Err(WordError::UnknownLetter(seg.to_string())),
                }
            }
        }
        Ok(out)
    }

    /// Print a word in the syntax accepted by [`Machine::parse_word`].
    pub fn format_word(&self, w: &[Letter]) -> String {
        if w.is_empty() {
            return ".".to_string();
        }
        let names = w.iter().map(|&l| self.alphabet[l as usize].as_str());
        if self.compact_letters() {
            names.collect()
        } else {
            names.collect::<Vec<_>>().join(",")
        }
    }

    pub fn format_actions(&self, seq: &[Action]) -> String {
        if seq.is_empty() {
            return ".".to_string();
        }
        seq.iter()
            .map(|a| {
                let d = if a.dir == Dir::Write { '!' } else { '?' };
                format!("{d}{}", self.format_word(&a.payload))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parse a `location:word` configuration literal.
    pub fn parse_config(&self, text: &str) -> Result<(LocationId, Word), String> {
        let (loc, word) = match text.rfind(':') {
            Some(i) => (&text[..i], &text[i + 1..]),
            None => (text, ""),
        };
        let loc = self
            .location(loc)
            .ok_or_else(|| format!("unknown location `{loc}`"))?;
        let word = self.parse_word(word).map_err(|e| e.to_string())?;
        Ok((loc, word))
    }

    pub fn format_config(&self, loc: LocationId, w: &[Letter]) -> String {
        let word = if w.is_empty() { String::new() } else { self.format_word(w) };
        format!("{}:{}", self.locations[loc], word)
    }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &line[s..i], column: line[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: line[..s].chars().count() + 1 });
    }
    out
}

pub fn parse_machine(text: &str) -> Result<Machine, ParseError> {
    let mut name: Option<String> = None;
    let mut alphabet: Option<Vec<String>> = None;
    let mut locations: Vec<String> = Vec::new();
    let mut loc_index: HashMap<String, LocationId> = HashMap::new();
    let mut initial: Option<LocationId> = None;
    let mut pending_rules: Vec<(usize, Vec<(String, usize)>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let toks = tokenize(line);
        let Some(head) = toks.first() else { continue };
        let syntax = |column: usize, msg: &str| ParseError::Syntax {
            line: line_no,
            column,
            msg: msg.to_string(),
        };
        match head.text {
            "machine" => {
                if toks.len() != 2 {
                    return Err(syntax(head.column, "expected `machine <name>`"));
                }
                if name.is_some() {
                    return Err(syntax(head.column, "duplicate `machine` line"));
                }
                name = Some(toks[1].text.to_string());
            }
            "alphabet" => {
                if alphabet.is_some() {
                    return Err(syntax(head.column, "duplicate `alphabet` line"));
                }
                if toks.len() < 2 {
                    return Err(syntax(head.column, "alphabet must not be empty"));
                }
                let mut letters: Vec<String> = Vec::new();
                for t in &toks[1..] {
                    if !valid_letter_name(t.text) {
                        return Err(syntax(t.column, &format!("invalid letter name `{}`", t.text)));
                    }
                    if letters.iter().any(|l| l == t.text) {
                        return Err(ParseError::Duplicate {
                            line: line_no,
                            what: "letter",
                            token: t.text.to_string(),
                        });
                    }
                    letters.push(t.text.to_string());
                }
                alphabet = Some(letters);
            }
            "loc" => {
                if toks.len() < 2 {
                    return Err(syntax(head.column, "expected at least one location"));
                }
                for t in &toks[1..] {
                    if t.text == "init" {
                        let Some(last) = locations.len().checked_sub(1) else {
                            return Err(syntax(t.column, "`init` must follow a location"));
                        };
                        if initial.is_some() {
                            return Err(syntax(t.column, "more than one initial location"));
                        }
                        initial = Some(last);
                        continue;
                    }
                    if !valid_location_name(t.text) {
                        return Err(syntax(t.column, &format!("invalid location name `{}`", t.text)));
                    }
                    if loc_index.contains_key(t.text) {
                        return Err(ParseError::Duplicate {
                            line: line_no,
                            what: "location",
                            token: t.text.to_string(),
                        });
                    }
                    loc_index.insert(t.text.to_string(), locations.len());
                    locations.push(t.text.to_string());
                }
            }
            "rule" => {
                let owned = toks.iter().map(|t| (t.text.to_string(), t.column)).collect();
                pending_rules.push((line_no, owned));
            }
            other => {
                return Err(syntax(head.column, &format!("unknown directive `{other}`")));
            }
        }
    }

    let name = name.ok_or_else(|| ParseError::Missing("missing `machine` line".into()))?;
    let alphabet = alphabet.ok_or_else(|| ParseError::Missing("missing `alphabet` line".into()))?;
    let mut m = Machine { name, alphabet, locations, rules: Vec::new(), initial };
    let mut rule_names: HashSet<String> = HashSet::new();

    for (line_no, toks) in pending_rules {
        let syntax = |column: usize, msg: &str| ParseError::Syntax {
            line: line_no,
            column,
            msg: msg.to_string(),
        };
        // rule [<id> :] <from> -> <to> : <actions>
        let mut i = 1;
        let mut rule_name = None;
        if toks.len() > 2 && toks[2].0 == ":" {
            rule_name = Some(toks[1].0.clone());
            i = 3;
        }
        if toks.len() < i + 4 || toks[i + 1].0 != "->" || toks[i + 3].0 != ":" {
            let col = toks.get(i).map(|t| t.1).unwrap_or(toks[0].1);
            return Err(syntax(col, "expected `rule [<id> :] <from> -> <to> : <actions>`"));
        }
        let lookup = |tok: &str| {
            m.location(tok).ok_or_else(|| ParseError::UnknownLocation {
                line: line_no,
                token: tok.to_string(),
            })
        };
        let from = lookup(&toks[i].0)?;
        let to = lookup(&toks[i + 2].0)?;
        let mut actions = Vec::new();
        let action_toks = &toks[i + 4..];
        if action_toks.is_empty() {
            return Err(syntax(toks[i + 3].1 + 1, "missing action (use `.` for none)"));
        }
        for (text, column) in action_toks {
            if text == "." {
                continue;
            }
            let dir = match text.chars().next() {
                Some('!') => Dir::Write,
                Some('?') => Dir::Read,
                _ => return Err(syntax(*column, &format!("action `{text}` must start with ! or ?"))),
            };
            let payload = m.parse_word(&text[1..]).map_err(|e| match e {
                WordError::UnknownLetter(token) => ParseError::UnknownLetter { line: line_no, token },
            })?;
            actions.push(Action { dir, payload });
        }
        let rule_name = rule_name.unwrap_or_else(|| format!("r{}", m.rules.len()));
        if !rule_names.insert(rule_name.clone()) {
            return Err(ParseError::Duplicate { line: line_no, what: "rule id", token: rule_name });
        }
        m.rules.push(Rule { name: rule_name, from, actions: normalize(actions), to });
    }
    Ok(m)
}

impl fmt::Display for Machine {
    /// Prints the machine in the text format; `parse_machine` reads it back
    /// to an equal value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "machine {}", self.name)?;
        writeln!(f, "alphabet {}", self.alphabet.join(" "))?;
        if !self.locations.is_empty() {
            let locs: Vec<String> = self
                .locations
                .iter()
                .enumerate()
                .map(|(i, l)| if Some(i) == self.initial { format!("{l} init") } else { l.clone() })
                .collect();
            writeln!(f, "loc {}", locs.join(" "))?;
        }
        for r in &self.rules {
            writeln!(
                f,
                "rule {} : {} -> {} : {}",
                r.name,
                self.locations[r.from],
                self.locations[r.to],
                self.format_actions(&r.actions)
            )?;
        }
        Ok(())
    }
}

/// Result of [`analyze_flatness`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatnessInfo {
    pub is_flat: bool,
    /// σ_q per location: the actions of the cycle through q, starting with
    /// the rule leaving q. Empty when q lies on no cycle.
    pub cycles: Vec<ActionSeq>,
    /// Rules of the cycle through q, starting with the rule leaving q.
    pub cycle_rules: Vec<Vec<RuleId>>,
    /// Index into `cycle_list` of the cycle through each location.
    pub cycle_of: Vec<Option<usize>>,
    pub cycle_list: Vec<Vec<RuleId>>,
    /// Strongly connected component of each location, numbered so that
    /// every rule goes from a component to itself or to a larger one.
    pub component: Vec<usize>,
    /// Two distinct elementary cycles (as rule lists) sharing a location.
    pub offending: Option<(Vec<RuleId>, Vec<RuleId>)>,
}

impl FlatnessInfo {
    pub fn on_cycle(&self, q: LocationId) -> bool {
        self.cycle_of[q].is_some()
    }

    pub fn same_cycle(&self, p: LocationId, q: LocationId) -> bool {
        self.cycle_of[p].is_some() && self.cycle_of[p] == self.cycle_of[q]
    }
}

/// Strongly connected components in topological order (iterative Tarjan).
fn components(m: &Machine) -> Vec<usize> {
    let n = m.locations.len();
    let mut succ = vec![Vec::new(); n];
    for r in &m.rules {
        succ[r.from].push(r.to);
    }
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next_index = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < succ[v].len() {
                let w = succ[v][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    // Tarjan emits components in reverse topological order.
    comp.iter().map(|&c| ncomp - 1 - c).collect()
}

/// Shortest rule path from `from` to `to` staying inside component `c`.
fn path_within(m: &Machine, comp: &[usize], c: usize, from: LocationId, to: LocationId) -> Vec<RuleId> {
    if from == to {
        return Vec::new();
    }
    let n = m.locations.len();
    let mut prev: Vec<Option<RuleId>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for (rid, r) in m.rules.iter().enumerate() {
            if r.from == v && comp[r.to] == c && !seen[r.to] {
                seen[r.to] = true;
                prev[r.to] = Some(rid);
                queue.push_back(r.to);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let rid = prev[cur].expect("component is strongly connected");
        path.push(rid);
        cur = m.rules[rid].from;
    }
    path.reverse();
    path
}

pub fn analyze_flatness(m: &Machine) -> FlatnessInfo {
    let n = m.locations.len();
    let comp = components(m);
    let ncomp = comp.iter().map(|c| c + 1).max().unwrap_or(0);
    let mut internal_out: Vec<Vec<RuleId>> = vec![Vec::new(); n];
    for (rid, r) in m.rules.iter().enumerate() {
        if comp[r.from] == comp[r.to] {
            internal_out[r.from].push(rid);
        }
    }
    let mut info = FlatnessInfo {
        is_flat: true,
        cycles: vec![Vec::new(); n],
        cycle_rules: vec![Vec::new(); n],
        cycle_of: vec![None; n],
        cycle_list: Vec::new(),
        component: comp.clone(),
        offending: None,
    };
    let mut members: Vec<Vec<LocationId>> = vec![Vec::new(); ncomp];
    for q in 0..n {
        members[comp[q]].push(q);
    }
    for (c, locs) in members.iter().enumerate() {
        let Some(&first) = locs.first() else { continue };
        if internal_out[first].is_empty() {
            continue; // trivial component without a self-loop
        }
        // A component is a simple cycle iff every member has exactly one
        // internal outgoing rule.
        if let Some(&s) = locs.iter().find(|&&q| internal_out[q].len() >= 2) {
            if info.offending.is_none() {
                let mut two = internal_out[s].iter().take(2).map(|&rid| {
                    let mut cyc = vec![rid];
                    cyc.extend(path_within(m, &comp, c, m.rules[rid].to, s));
                    cyc
                });
                let a = two.next().expect("two rules");
                let b = two.next().expect("two rules");
                info.offending = Some((a, b));
            }
            info.is_flat = false;
            continue;
        }
        let idx = info.cycle_list.len();
        let mut rules = Vec::with_capacity(locs.len());
        let mut cur = first;
        loop {
            let rid = internal_out[cur][0];
            rules.push(rid);
            cur = m.rules[rid].to;
            if cur == first {
                break;
            }
        }
        for (i, &rid) in rules.iter().enumerate() {
            let q = m.rules[rid].from;
            let rotated: Vec<RuleId> = rules[i..].iter().chain(&rules[..i]).copied().collect();
            info.cycles[q] = rotated.iter().flat_map(|&r| m.rules[r].actions.iter().cloned()).collect();
            info.cycle_rules[q] = rotated;
            info.cycle_of[q] = Some(idx);
        }
        info.cycle_list.push(rules);
    }
    info
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "machine m\nalphabet a b\nloc q0 q1\nrule q0 -> q1 : !ab\n";

    #[test]
    fn parses_minimal_machine() {
        let m = parse_machine(TWO).unwrap();
        assert_eq!(m.locations.len(), 2);
        assert_eq!(m.rules.len(), 1);
        assert_eq!(m.rules[0].actions, vec![Action::write(vec![0, 1])]);
        assert_eq!(m.rules[0].name, "r0");
    }

    #[test]
    fn epsilon_rule_is_empty_sequence() {
        let m = parse_machine("machine m\nalphabet a\nloc p q\nrule p -> q : .\nrule p -> q : !. ?.\n").unwrap();
        assert!(m.rules[0].actions.is_empty());
        assert!(m.rules[1].actions.is_empty());
    }

    #[test]
    fn unknown_location_is_named() {
        let err = parse_machine("machine m\nalphabet a\nloc q0\nrule q0 -> q9 : !a\n").unwrap_err();
        assert_eq!(err, ParseError::UnknownLocation { line: 4, token: "q9".into() });
    }

    #[test]
    fn unknown_letter_and_duplicates() {
        let err = parse_machine("machine m\nalphabet a\nloc q\nrule q -> q : !c\n").unwrap_err();
        assert!(matches!(err, ParseError::UnknownLetter { line: 4, .. }));
        let err = parse_machine("machine m\nalphabet a\nloc q\nrule t : q -> q : !a\nrule t : q -> q : ?a\n")
            .unwrap_err();
        assert!(matches!(err, ParseError::Duplicate { what: "rule id", .. }));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_machine("machine m\nalphabet a\nloc q\nrule q => q : !a\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 4, column: 6, .. }), "{err:?}");
        let err = parse_machine("machine m\nalphabet a\nloc q\nrule q -> q : a\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 4, column: 15, .. }), "{err:?}");
    }

    #[test]
    fn multi_character_letters() {
        let m = parse_machine("machine m\nalphabet v1 0 x\nloc p\nrule p -> p : ?v1,0 !0,x,v1\n").unwrap();
        assert_eq!(m.rules[0].actions[0].payload, vec![0, 1]);
        assert_eq!(m.format_actions(&m.rules[0].actions), "?v1,0 !0,x,v1");
        assert_eq!(parse_machine(&m.to_string()).unwrap(), m);
    }

    #[test]
    fn wri_rea_projections() {
        let m = parse_machine("machine m\nalphabet a b\nloc p\nrule p -> p : !abbbbb ?bbbb\n").unwrap();
        let s = &m.rules[0].actions;
        assert_eq!(wri(s), vec![0, 1, 1, 1, 1, 1]);
        assert_eq!(rea(s), vec![1, 1, 1, 1]);
        assert!(wri(&[]).is_empty() && rea(&[]).is_empty());
    }

    #[test]
    fn flatness_of_self_loops() {
        let m = parse_machine("machine m\nalphabet a\nloc p\nrule p -> p : ?a !aa\nrule p -> p : ?a\n").unwrap();
        let f = analyze_flatness(&m);
        assert!(!f.is_flat);
        let (a, b) = f.offending.unwrap();
        assert_eq!((a, b), (vec![0], vec![1]));

        let m = parse_machine("machine m\nalphabet a\nloc p q\nrule p -> p : ?a !aa\nrule p -> q : ?a\n").unwrap();
        let f = analyze_flatness(&m);
        assert!(f.is_flat);
        assert_eq!(f.cycles[0], vec![Action::read(vec![0]), Action::write(vec![0, 0])]);
        assert!(f.cycles[1].is_empty());
    }

    #[test]
    fn cycle_words_are_rotations() {
        let m = parse_machine(
            "machine m\nalphabet a b\nloc p q r\nrule p -> q : !a\nrule q -> r : ?b\nrule r -> p : !b\n",
        )
        .unwrap();
        let f = analyze_flatness(&m);
        assert!(f.is_flat);
        assert_eq!(f.cycle_rules[1], vec![1, 2, 0]);
        assert_eq!(f.cycles[1][0], Action::read(vec![1]));
        assert!(f.same_cycle(0, 2));
    }

    #[test]
    fn config_literals() {
        let m = parse_machine("machine m\nalphabet a b\nloc q0 q'0\n").unwrap();
        assert_eq!(m.parse_config("q'0:ab").unwrap(), (1, vec![0, 1]));
        assert_eq!(m.parse_config("q0:").unwrap(), (0, vec![]));
        assert_eq!(m.format_config(1, &[1]), "q'0:b");
    }
}

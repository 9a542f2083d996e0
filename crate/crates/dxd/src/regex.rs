//! Regular expressions: parsing/printing, Glushkov compilation, expression
//! determinism, and one-unambiguity with deterministic-expression synthesis.

use crate::automata::{minimize, Dfa, Nfa, StateId};
use crate::{Caps, Error, Result, Symbol};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegexAst {
    Epsilon,
    EmptySet,
    Sym(Symbol),
    Concat(Box<RegexAst>, Box<RegexAst>),
    Alt(Box<RegexAst>, Box<RegexAst>),
    Opt(Box<RegexAst>),
    Plus(Box<RegexAst>),
    Star(Box<RegexAst>),
}

impl RegexAst {
    pub fn node_count(&self) -> usize {
        match self {
            RegexAst::Epsilon | RegexAst::EmptySet | RegexAst::Sym(_) => 1,
            RegexAst::Concat(l, r) | RegexAst::Alt(l, r) => 1 + l.node_count() + r.node_count(),
            RegexAst::Opt(r) | RegexAst::Plus(r) | RegexAst::Star(r) => 1 + r.node_count(),
        }
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            RegexAst::Sym(s) => {
                out.insert(s.clone());
            }
            RegexAst::Concat(l, r) | RegexAst::Alt(l, r) => {
                l.collect_symbols(out);
                r.collect_symbols(out);
            }
            RegexAst::Opt(r) | RegexAst::Plus(r) | RegexAst::Star(r) => r.collect_symbols(out),
            _ => {}
        }
    }
}

impl fmt::Display for RegexAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_regex(self))
    }
}

// ---------------------------------------------------------------- parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Sym(Symbol),
    Epsilon,
    Empty,
    LParen,
    RParen,
    Plus,
    Bar,
    Star,
    Quest,
    Dot,
    Comma,
}

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '#' | '.' | '@' | '-')
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut toks = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                toks.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((pos, Tok::RParen));
                i += 1;
            }
            '+' => {
                toks.push((pos, Tok::Plus));
                i += 1;
            }
            '|' => {
                toks.push((pos, Tok::Bar));
                i += 1;
            }
            '*' => {
                toks.push((pos, Tok::Star));
                i += 1;
            }
            '?' => {
                toks.push((pos, Tok::Quest));
                i += 1;
            }
            '·' => {
                toks.push((pos, Tok::Dot));
                i += 1;
            }
            ',' => {
                toks.push((pos, Tok::Comma));
                i += 1;
            }
            'ε' => {
                toks.push((pos, Tok::Epsilon));
                i += 1;
            }
            '%' => {
                match chars.get(i + 1).map(|(_, c)| *c) {
                    Some('e') => toks.push((pos, Tok::Epsilon)),
                    Some('0') => toks.push((pos, Tok::Empty)),
                    other => {
                        return Err(Error::Syntax {
                            pos,
                            msg: format!("expected %e or %0, found %{}", other.map(String::from).unwrap_or_default()),
                        })
                    }
                }
                i += 2;
            }
            c if is_symbol_char(c) => {
                let start = i;
                while i < chars.len() && is_symbol_char(chars[i].1) {
                    i += 1;
                }
                let sym: String = chars[start..i].iter().map(|(_, c)| *c).collect();
                toks.push((pos, Tok::Sym(sym)));
            }
            other => {
                return Err(Error::Syntax {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    i: usize,
    nodes: usize,
    cap: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn starts_atom(t: Option<&Tok>) -> bool {
        matches!(
            t,
            Some(Tok::Sym(_)) | Some(Tok::Epsilon) | Some(Tok::Empty) | Some(Tok::LParen)
        )
    }

    fn alternation(&mut self) -> Result<RegexAst> {
        let mut parts = vec![self.concatenation()?];
        while matches!(self.peek(), Some(Tok::Plus) | Some(Tok::Bar)) {
            self.i += 1;
            parts.push(self.concatenation()?);
        }
        let mut out = parts.pop().unwrap();
        while let Some(p) = parts.pop() {
            out = RegexAst::Alt(Box::new(p), Box::new(out));
            self.bump()?;
        }
        Ok(out)
    }

    fn concatenation(&mut self) -> Result<RegexAst> {
        let mut parts = vec![self.postfix()?];
        loop {
            match self.peek() {
                Some(Tok::Dot) | Some(Tok::Comma) => {
                    self.i += 1;
                    parts.push(self.postfix()?);
                }
                t if Self::starts_atom(t) => parts.push(self.postfix()?),
                _ => break,
            }
        }
        let mut out = parts.pop().unwrap();
        while let Some(p) = parts.pop() {
            out = RegexAst::Concat(Box::new(p), Box::new(out));
            self.bump()?;
        }
        Ok(out)
    }

    // `+` directly after an atom is iteration exactly when what follows
    // cannot begin an atom; otherwise it is left for the alternation level.
    fn postfix(&mut self) -> Result<RegexAst> {
        let mut out = self.atom()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.i += 1;
                    out = RegexAst::Star(Box::new(out));
                    self.bump()?;
                }
                Some(Tok::Quest) => {
                    self.i += 1;
                    out = RegexAst::Opt(Box::new(out));
                    self.bump()?;
                }
                Some(Tok::Plus) if !Self::starts_atom(self.toks.get(self.i + 1).map(|(_, t)| t)) => {
                    self.i += 1;
                    out = RegexAst::Plus(Box::new(out));
                    self.bump()?;
                }
                _ => break,
            }
        }
        Ok(out)
    }

    fn bump(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::ResourceCap(format!(
                "regular expression exceeds {} nodes",
                self.cap
            )));
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<RegexAst> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Sym(s)) => {
                self.i += 1;
                self.bump()?;
                Ok(RegexAst::Sym(s))
            }
            Some(Tok::Epsilon) => {
                self.i += 1;
                self.bump()?;
                Ok(RegexAst::Epsilon)
            }
            Some(Tok::Empty) => {
                self.i += 1;
                self.bump()?;
                Ok(RegexAst::EmptySet)
            }
            Some(Tok::LParen) => {
                self.i += 1;
                let inner = self.alternation()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.i += 1;
                        Ok(inner)
                    }
                    _ => Err(Error::Syntax {
                        pos: self.pos(),
                        msg: "expected `)`".into(),
                    }),
                }
            }
            other => Err(Error::Syntax {
                pos,
                msg: format!("expected a symbol, epsilon, %0 or `(`, found {other:?}"),
            }),
        }
    }
}

pub fn parse_regex(text: &str, caps: &Caps) -> Result<RegexAst> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(Error::Syntax {
            pos: 0,
            msg: "empty regular expression (write %e for epsilon)".into(),
        });
    }
    let mut p = Parser {
        toks: &toks,
        i: 0,
        nodes: 0,
        cap: caps.max_regex_nodes,
        end: text.len(),
    };
    let ast = p.alternation()?;
    if p.i != toks.len() {
        return Err(Error::Syntax {
            pos: p.pos(),
            msg: "trailing input after expression".into(),
        });
    }
    Ok(ast)
}

/// Unambiguous text form; `parse_regex` returns the same tree back.
/// Concatenation is comma-separated so that a following `+` always reads as
/// iteration.
pub fn print_regex(r: &RegexAst) -> String {
    fn prec(r: &RegexAst) -> u8 {
        match r {
            RegexAst::Alt(..) => 0,
            RegexAst::Concat(..) => 1,
            RegexAst::Opt(_) | RegexAst::Plus(_) | RegexAst::Star(_) => 2,
            _ => 3,
        }
    }
    fn go(r: &RegexAst, min: u8, out: &mut String) {
        let wrap = prec(r) < min;
        if wrap {
            out.push('(');
        }
        match r {
            RegexAst::Epsilon => out.push_str("%e"),
            RegexAst::EmptySet => out.push_str("%0"),
            RegexAst::Sym(s) => out.push_str(s),
            RegexAst::Alt(l, rr) => {
                go(l, 1, out);
                out.push_str(" + ");
                go(rr, 0, out);
            }
            RegexAst::Concat(l, rr) => {
                go(l, 2, out);
                out.push_str(", ");
                go(rr, 1, out);
            }
            RegexAst::Opt(x) => {
                go(x, 3, out);
                out.push('?');
            }
            RegexAst::Plus(x) => {
                go(x, 3, out);
                out.push('+');
            }
            RegexAst::Star(x) => {
                go(x, 3, out);
                out.push('*');
            }
        }
        if wrap {
            out.push(')');
        }
    }
    let mut s = String::new();
    go(r, 0, &mut s);
    s
}

// ------------------------------------------------- marked form / Glushkov

/// Position-marked view of an expression: position `i` (1-based) carries the
/// symbol `positions[i-1]`, in left-to-right order. `first`, `last` and
/// `follow` are over positions.
#[derive(Clone, Debug)]
pub struct MarkedRegex {
    pub positions: Vec<Symbol>,
    pub nullable: bool,
    pub first: BTreeSet<usize>,
    pub last: BTreeSet<usize>,
    pub follow: BTreeMap<usize, BTreeSet<usize>>,
}

struct Gl {
    nullable: bool,
    first: BTreeSet<usize>,
    last: BTreeSet<usize>,
}

pub fn mark(r: &RegexAst) -> MarkedRegex {
    let mut positions = Vec::new();
    let mut follow: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();

    fn go(
        r: &RegexAst,
        positions: &mut Vec<Symbol>,
        follow: &mut BTreeMap<usize, BTreeSet<usize>>,
    ) -> Gl {
        match r {
            RegexAst::Epsilon => Gl {
                nullable: true,
                first: BTreeSet::new(),
                last: BTreeSet::new(),
            },
            RegexAst::EmptySet => Gl {
                nullable: false,
                first: BTreeSet::new(),
                last: BTreeSet::new(),
            },
            RegexAst::Sym(s) => {
                positions.push(s.clone());
                let i = positions.len();
                Gl {
                    nullable: false,
                    first: BTreeSet::from([i]),
                    last: BTreeSet::from([i]),
                }
            }
            RegexAst::Concat(l, rr) => {
                let a = go(l, positions, follow);
                let b = go(rr, positions, follow);
                for p in &a.last {
                    follow.entry(*p).or_default().extend(b.first.iter());
                }
                let mut first = a.first.clone();
                if a.nullable {
                    first.extend(b.first.iter());
                }
                let mut last = b.last.clone();
                if b.nullable {
                    last.extend(a.last.iter());
                }
                Gl {
                    nullable: a.nullable && b.nullable,
                    first,
                    last,
                }
            }
            RegexAst::Alt(l, rr) => {
                let a = go(l, positions, follow);
                let b = go(rr, positions, follow);
                Gl {
                    nullable: a.nullable || b.nullable,
                    first: a.first.union(&b.first).copied().collect(),
                    last: a.last.union(&b.last).copied().collect(),
                }
            }
            RegexAst::Opt(x) => {
                let a = go(x, positions, follow);
                Gl {
                    nullable: true,
                    ..a
                }
            }
            RegexAst::Plus(x) | RegexAst::Star(x) => {
                let a = go(x, positions, follow);
                for p in &a.last {
                    follow.entry(*p).or_default().extend(a.first.iter());
                }
                Gl {
                    nullable: a.nullable || matches!(r, RegexAst::Star(_)),
                    first: a.first,
                    last: a.last,
                }
            }
        }
    }

    let g = go(r, &mut positions, &mut follow);
    MarkedRegex {
        positions,
        nullable: g.nullable,
        first: g.first,
        last: g.last,
        follow,
    }
}

/// Epsilon-free position automaton; state count = positions + 1.
pub fn to_nfa(r: &RegexAst) -> Nfa {
    let m = mark(r);
    let k = m.positions.len();
    let mut labels = Vec::with_capacity(k + 1);
    labels.push("start".to_string());
    for (i, s) in m.positions.iter().enumerate() {
        labels.push(format!("{}.{}", s, i + 1));
    }
    let mut transitions = BTreeSet::new();
    for i in &m.first {
        transitions.insert((0usize, Some(m.positions[i - 1].clone()), *i));
    }
    for (j, set) in &m.follow {
        for i in set {
            transitions.insert((*j, Some(m.positions[i - 1].clone()), *i));
        }
    }
    let mut finals: BTreeSet<StateId> = m.last.clone();
    if m.nullable {
        finals.insert(0);
    }
    Nfa {
        alphabet: r.symbols(),
        labels,
        initial: 0,
        finals,
        transitions,
    }
}

/// Expression determinism: no state of the position automaton has two
/// outgoing moves on the same (unmarked) symbol.
pub fn is_dre(r: &RegexAst) -> bool {
    let m = mark(r);
    let distinct = |set: &BTreeSet<usize>| {
        let mut seen = BTreeSet::new();
        set.iter().all(|i| seen.insert(m.positions[i - 1].clone()))
    };
    if !distinct(&m.first) {
        return false;
    }
    m.follow.values().all(distinct)
}

// ------------------------------------------------ one-unambiguity + synthesis

/// Partial deterministic automaton used by the orbit analysis. All states
/// are reachable from `initial` and reach a final state.
#[derive(Clone, Debug)]
struct Pdfa {
    n: usize,
    initial: usize,
    finals: BTreeSet<usize>,
    // delta[q]: symbol -> target
    delta: Vec<BTreeMap<Symbol, usize>>,
}

impl Pdfa {
    fn from_parts(
        keep: &BTreeSet<usize>,
        initial: usize,
        finals: &BTreeSet<usize>,
        delta: &[BTreeMap<Symbol, usize>],
    ) -> Option<Pdfa> {
        // trim: reachable from initial, co-reachable to a final
        let mut reach = BTreeSet::from([initial]);
        let mut queue = VecDeque::from([initial]);
        while let Some(q) = queue.pop_front() {
            for t in delta[q].values() {
                if keep.contains(t) && reach.insert(*t) {
                    queue.push_back(*t);
                }
            }
        }
        let mut co: BTreeSet<usize> = finals.intersection(&reach).copied().collect();
        loop {
            let mut grew = false;
            for q in reach.iter() {
                if !co.contains(q)
                    && delta[*q]
                        .values()
                        .any(|t| keep.contains(t) && co.contains(t) && reach.contains(t))
                {
                    co.insert(*q);
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        let useful: BTreeSet<usize> = reach.intersection(&co).copied().collect();
        if !useful.contains(&initial) {
            return None;
        }
        let remap: BTreeMap<usize, usize> =
            useful.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let mut nd = vec![BTreeMap::new(); useful.len()];
        for q in &useful {
            for (s, t) in &delta[*q] {
                if useful.contains(t) && keep.contains(t) {
                    nd[remap[q]].insert(s.clone(), remap[t]);
                }
            }
        }
        Some(Pdfa {
            n: useful.len(),
            initial: remap[&initial],
            finals: finals
                .iter()
                .filter(|f| useful.contains(f))
                .map(|f| remap[f])
                .collect(),
            delta: nd,
        })
    }

    fn to_nfa(&self) -> Nfa {
        let alphabet: BTreeSet<Symbol> = self
            .delta
            .iter()
            .flat_map(|m| m.keys().cloned())
            .collect();
        Nfa {
            alphabet,
            labels: (0..self.n).map(|q| format!("q{q}")).collect(),
            initial: self.initial,
            finals: self.finals.clone(),
            transitions: self
                .delta
                .iter()
                .enumerate()
                .flat_map(|(q, m)| {
                    m.iter().map(move |(s, t)| (q, Some(s.clone()), *t))
                })
                .collect(),
        }
    }

    /// Minimal partial DFA of the same language (sink dropped again).
    fn minimized(&self, caps: &Caps) -> Result<Option<Pdfa>> {
        let dfa = minimize(&self.to_nfa().determinize(caps)?);
        Ok(pdfa_of_min_dfa(&dfa))
    }

    /// Strongly connected component of `q` (Tarjan is overkill at this
    /// scale; forward ∩ backward reachability).
    fn orbit(&self, q: usize) -> BTreeSet<usize> {
        let fwd = self.reach_from(q);
        let mut back = BTreeSet::from([q]);
        loop {
            let mut grew = false;
            for p in 0..self.n {
                if !back.contains(&p) && self.delta[p].values().any(|t| back.contains(t)) {
                    back.insert(p);
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        fwd.intersection(&back).copied().collect()
    }

    fn reach_from(&self, q: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([q]);
        let mut queue = VecDeque::from([q]);
        while let Some(p) = queue.pop_front() {
            for t in self.delta[p].values() {
                if seen.insert(*t) {
                    queue.push_back(*t);
                }
            }
        }
        seen
    }
}

fn pdfa_of_min_dfa(d: &Dfa) -> Option<Pdfa> {
    let nfa = d.as_nfa();
    let mut delta = vec![BTreeMap::new(); nfa.n_states()];
    for (f, s, t) in &nfa.transitions {
        delta[*f].insert(s.clone().unwrap(), *t);
    }
    let keep: BTreeSet<usize> = (0..nfa.n_states()).collect();
    Pdfa::from_parts(&keep, nfa.initial, &nfa.finals, &delta)
}

fn alt_of(parts: Vec<RegexAst>) -> RegexAst {
    let mut it = parts.into_iter().rev();
    let mut out = it.next().unwrap_or(RegexAst::EmptySet);
    for p in it {
        out = RegexAst::Alt(Box::new(p), Box::new(out));
    }
    out
}

fn concat_of(a: RegexAst, b: RegexAst) -> RegexAst {
    match (&a, &b) {
        (RegexAst::EmptySet, _) | (_, RegexAst::EmptySet) => RegexAst::EmptySet,
        (RegexAst::Epsilon, _) => b,
        (_, RegexAst::Epsilon) => a,
        _ => RegexAst::Concat(Box::new(a), Box::new(b)),
    }
}

struct Synth<'a> {
    caps: &'a Caps,
    budget: usize,
}

impl<'a> Synth<'a> {
    fn charge(&mut self, ast: &RegexAst) -> Result<()> {
        let n = ast.node_count();
        if n > self.budget {
            return Err(Error::ResourceCap(format!(
                "deterministic expression exceeds {} nodes",
                self.caps.max_regex_nodes
            )));
        }
        Ok(())
    }

    /// Orbit decomposition on a minimal partial DFA. `None` = the language
    /// is not one-unambiguous.
    fn synth(&mut self, m: &Pdfa) -> Result<Option<RegexAst>> {
        let orbit = m.orbit(m.initial);
        let nontrivial = orbit
            .iter()
            .any(|q| m.delta[*q].values().any(|t| orbit.contains(t)));
        // gates of the initial orbit and their outward behavior
        let mut gates = Vec::new();
        for q in &orbit {
            let outs: BTreeMap<&Symbol, usize> = m.delta[*q]
                .iter()
                .filter(|(_, t)| !orbit.contains(t))
                .map(|(s, t)| (s, *t))
                .collect();
            if m.finals.contains(q) || !outs.is_empty() {
                gates.push((*q, m.finals.contains(q), outs));
            }
        }
        debug_assert!(!gates.is_empty(), "trim automaton has a gate in the initial orbit");
        let (_, fin0, outs0) = gates[0].clone();
        if gates.iter().any(|(_, f, o)| *f != fin0 || *o != outs0) {
            return Ok(None);
        }
        let orbit_expr = if nontrivial {
            let gate_set: BTreeSet<usize> = gates.iter().map(|(q, _, _)| *q).collect();
            let internal: Vec<BTreeMap<Symbol, usize>> = (0..m.n)
                .map(|q| {
                    if orbit.contains(&q) {
                        m.delta[q]
                            .iter()
                            .filter(|(_, t)| orbit.contains(t))
                            .map(|(s, t)| (s.clone(), *t))
                            .collect()
                    } else {
                        BTreeMap::new()
                    }
                })
                .collect();
            let sub = Pdfa::from_parts(&orbit, m.initial, &gate_set, &internal)
                .expect("initial orbit reaches one of its gates");
            let sub = sub.minimized(self.caps)?.expect("orbit language is nonempty");
            match self.orbit_synth(&sub)? {
                Some(e) => e,
                None => return Ok(None),
            }
        } else {
            RegexAst::Epsilon
        };
        let mut parts = Vec::new();
        for (sym, target) in &outs0 {
            let keep = m.reach_from(*target);
            let sub = Pdfa::from_parts(&keep, *target, &m.finals, &m.delta)
                .expect("outward target reaches a final state");
            let sub = sub.minimized(self.caps)?.expect("nonempty sub-language");
            match self.synth(&sub)? {
                Some(e) => parts.push(concat_of(RegexAst::Sym((*sym).clone()), e)),
                None => return Ok(None),
            }
        }
        let tail = if parts.is_empty() {
            RegexAst::Epsilon
        } else {
            let alt = alt_of(parts);
            if fin0 {
                RegexAst::Opt(Box::new(alt))
            } else {
                alt
            }
        };
        let out = concat_of(orbit_expr, tail);
        self.charge(&out)?;
        Ok(Some(out))
    }

    /// `m` is minimal and consists of a single nontrivial strongly connected
    /// orbit whose gates are `m.finals`. All gates must agree on their
    /// outgoing symbols and targets; cutting every gate transition yields
    /// the base and loop languages.
    fn orbit_synth(&mut self, m: &Pdfa) -> Result<Option<RegexAst>> {
        let gates = &m.finals;
        let g0 = *gates.iter().next().unwrap();
        let out0 = m.delta[g0].clone();
        for g in gates {
            if m.delta[*g] != out0 {
                return Ok(None);
            }
        }
        // cut all transitions out of gates
        let delta: Vec<BTreeMap<Symbol, usize>> = (0..m.n)
            .map(|q| {
                if gates.contains(&q) {
                    BTreeMap::new()
                } else {
                    m.delta[q].clone()
                }
            })
            .collect();
        let all: BTreeSet<usize> = (0..m.n).collect();
        let base = match self.sub_language(&all, m.initial, gates, &delta)? {
            Some(e) => e,
            None => return Ok(None),
        };
        let mut loops = Vec::new();
        for (sym, target) in &out0 {
            match self.sub_language(&all, *target, gates, &delta)? {
                Some(e) => loops.push(concat_of(RegexAst::Sym(sym.clone()), e)),
                None => return Ok(None),
            }
        }
        let out = if loops.is_empty() {
            base
        } else {
            concat_of(base, RegexAst::Star(Box::new(alt_of(loops))))
        };
        self.charge(&out)?;
        Ok(Some(out))
    }

    fn sub_language(
        &mut self,
        keep: &BTreeSet<usize>,
        initial: usize,
        finals: &BTreeSet<usize>,
        delta: &[BTreeMap<Symbol, usize>],
    ) -> Result<Option<RegexAst>> {
        let sub = Pdfa::from_parts(keep, initial, finals, delta)
            .expect("cut orbit keeps a path to a gate");
        let sub = sub.minimized(self.caps)?.expect("nonempty cut language");
        self.synth(&sub)
    }
}

/// Deterministic expression for `L(a)` when that language is
/// one-unambiguous; `None` otherwise. The result is checked: it is a
/// deterministic expression and equivalent to the input.
pub fn to_dre(a: &Nfa, caps: &Caps) -> Result<Option<RegexAst>> {
    let min = minimize(&a.epsilon_free().determinize(caps)?);
    let Some(pdfa) = pdfa_of_min_dfa(&min) else {
        return Ok(Some(RegexAst::EmptySet));
    };
    let mut s = Synth {
        caps,
        budget: caps.max_regex_nodes,
    };
    let Some(expr) = s.synth(&pdfa)? else {
        return Ok(None);
    };
    if !is_dre(&expr) || !Nfa::equivalent(&to_nfa(&expr), a, caps)? {
        return Err(Error::Unsupported(
            "internal: orbit synthesis produced a wrong expression".into(),
        ));
    }
    Ok(Some(expr))
}

pub fn is_one_unambiguous(a: &Nfa, caps: &Caps) -> Result<bool> {
    Ok(to_dre(a, caps)?.is_some())
}

// -------------------------------------------------------- state elimination

/// Some (not necessarily deterministic) expression for `L(a)`, by state
/// elimination. Used for displaying machine-backed content models.
pub fn nfa_to_regex(a: &Nfa, caps: &Caps) -> Result<RegexAst> {
    let a = a.trim();
    if a.is_empty_lang() {
        return Ok(RegexAst::EmptySet);
    }
    let n = a.n_states();
    let init = n;
    let fin = n + 1;
    let mut edges: BTreeMap<(usize, usize), RegexAst> = BTreeMap::new();
    let add = |edges: &mut BTreeMap<(usize, usize), RegexAst>, f: usize, t: usize, e: RegexAst| {
        match edges.remove(&(f, t)) {
            Some(old) => {
                let merged = if old == e { old } else { RegexAst::Alt(Box::new(old), Box::new(e)) };
                edges.insert((f, t), merged);
            }
            None => {
                edges.insert((f, t), e);
            }
        }
    };
    add(&mut edges, init, a.initial, RegexAst::Epsilon);
    for f in &a.finals {
        add(&mut edges, *f, fin, RegexAst::Epsilon);
    }
    for (f, s, t) in &a.transitions {
        let e = match s {
            Some(sym) => RegexAst::Sym(sym.clone()),
            None => RegexAst::Epsilon,
        };
        add(&mut edges, *f, *t, e);
    }
    for x in 0..n {
        let self_loop = edges.remove(&(x, x));
        let ins: Vec<(usize, RegexAst)> = edges
            .iter()
            .filter(|((_, t), _)| *t == x)
            .map(|((f, _), e)| (*f, e.clone()))
            .collect();
        let outs: Vec<(usize, RegexAst)> = edges
            .iter()
            .filter(|((f, _), _)| *f == x)
            .map(|((_, t), e)| (*t, e.clone()))
            .collect();
        edges.retain(|(f, t), _| *f != x && *t != x);
        let mid = match self_loop {
            Some(RegexAst::Epsilon) | None => RegexAst::Epsilon,
            Some(e) => RegexAst::Star(Box::new(e)),
        };
        for (f, ein) in &ins {
            for (t, eout) in &outs {
                let e = concat_of(ein.clone(), concat_of(mid.clone(), eout.clone()));
                add(&mut edges, *f, *t, e);
                let total: usize = edges.values().map(|e| e.node_count()).sum();
                if total > caps.max_regex_nodes {
                    return Err(Error::ResourceCap(format!(
                        "state elimination exceeds {} nodes",
                        caps.max_regex_nodes
                    )));
                }
            }
        }
    }
    Ok(edges.remove(&(init, fin)).unwrap_or(RegexAst::EmptySet))
}

//! Finite-automaton engine: construction, boolean combinations, equivalence,
//! and the delimited-string / local-automaton primitives the slot-automaton
//! construction is made of.

use crate::{Caps, Error, Result, Symbol};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub type StateId = usize;

/// Nondeterministic finite automaton with optional epsilon moves.
///
/// States are `0..labels.len()`; `labels` carries a provenance tag per state
/// (original state name, copy index) used only for diagnostics. Transition
/// symbols are either `Some(symbol)` or `None` for epsilon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nfa {
    pub alphabet: BTreeSet<Symbol>,
    pub labels: Vec<String>,
    pub initial: StateId,
    pub finals: BTreeSet<StateId>,
    pub transitions: BTreeSet<(StateId, Option<Symbol>, StateId)>,
}

/// Deterministic automaton: epsilon-free, at most one move per state/symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa(Nfa);

impl Dfa {
    pub fn as_nfa(&self) -> &Nfa {
        &self.0
    }

    pub fn into_nfa(self) -> Nfa {
        self.0
    }

    /// Wrap an existing automaton, checking the determinism invariants.
    pub fn try_new(nfa: Nfa) -> Result<Dfa> {
        let mut seen = BTreeSet::new();
        for (q, sym, _) in &nfa.transitions {
            match sym {
                None => {
                    return Err(Error::Unsupported(
                        "deterministic automaton with epsilon move".into(),
                    ))
                }
                Some(s) => {
                    if !seen.insert((*q, s.clone())) {
                        return Err(Error::Unsupported(format!(
                            "two moves from state {q} on `{s}`"
                        )));
                    }
                }
            }
        }
        Ok(Dfa(nfa))
    }

    pub fn delta(&self, q: StateId, sym: &str) -> Option<StateId> {
        self.0
            .transitions
            .iter()
            .find(|(from, s, _)| *from == q && s.as_deref() == Some(sym))
            .map(|(_, _, to)| *to)
    }

    pub fn n_states(&self) -> usize {
        self.0.n_states()
    }
}

/// Fixed-width language of per-position symbol sets: exactly the strings
/// `a_1 ... a_n` with each `a_i` drawn from cell `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxLang {
    cells: Vec<BTreeSet<Symbol>>,
}

impl BoxLang {
    pub fn new(cells: Vec<BTreeSet<Symbol>>) -> Result<BoxLang> {
        if cells.iter().any(|c| c.is_empty()) {
            return Err(Error::EmptyLanguage("box with an empty cell".into()));
        }
        Ok(BoxLang { cells })
    }

    pub fn width(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[BTreeSet<Symbol>] {
        &self.cells
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.cells.iter().flatten().cloned().collect()
    }

    /// The box language as an automaton (a chain of alternations).
    pub fn to_nfa(&self) -> Nfa {
        let n = self.width();
        let labels = (0..=n).map(|i| format!("b{i}")).collect::<Vec<_>>();
        let mut transitions = BTreeSet::new();
        for (i, cell) in self.cells.iter().enumerate() {
            for sym in cell {
                transitions.insert((i, Some(sym.clone()), i + 1));
            }
        }
        Nfa {
            alphabet: self.symbols(),
            labels,
            initial: 0,
            finals: BTreeSet::from([n]),
            transitions,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComposeOp {
    Concat,
    Union,
    Intersect,
    Difference,
}

impl Nfa {
    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    /// Canonical automaton for the empty language: one non-final state.
    pub fn empty_lang(alphabet: BTreeSet<Symbol>) -> Nfa {
        Nfa {
            alphabet,
            labels: vec!["0".into()],
            initial: 0,
            finals: BTreeSet::new(),
            transitions: BTreeSet::new(),
        }
    }

    /// Automaton for `{epsilon}`.
    pub fn epsilon_lang(alphabet: BTreeSet<Symbol>) -> Nfa {
        Nfa {
            alphabet,
            labels: vec!["0".into()],
            initial: 0,
            finals: BTreeSet::from([0]),
            transitions: BTreeSet::new(),
        }
    }

    /// Chain automaton for a single word.
    pub fn word_lang(word: &[Symbol], mut alphabet: BTreeSet<Symbol>) -> Nfa {
        alphabet.extend(word.iter().cloned());
        let n = word.len();
        let labels = (0..=n).map(|i| i.to_string()).collect();
        let transitions = word
            .iter()
            .enumerate()
            .map(|(i, s)| (i, Some(s.clone()), i + 1))
            .collect();
        Nfa {
            alphabet,
            labels,
            initial: 0,
            finals: BTreeSet::from([n]),
            transitions,
        }
    }

    pub fn is_epsilon_free(&self) -> bool {
        self.transitions.iter().all(|(_, s, _)| s.is_some())
    }

    fn epsilon_closure(&self, set: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        let mut closure = set.clone();
        let mut queue: VecDeque<StateId> = set.iter().copied().collect();
        while let Some(q) = queue.pop_front() {
            for (from, sym, to) in &self.transitions {
                if *from == q && sym.is_none() && closure.insert(*to) {
                    queue.push_back(*to);
                }
            }
        }
        closure
    }

    fn step(&self, set: &BTreeSet<StateId>, sym: &str) -> BTreeSet<StateId> {
        let mut next = BTreeSet::new();
        for (from, s, to) in &self.transitions {
            if set.contains(from) && s.as_deref() == Some(sym) {
                next.insert(*to);
            }
        }
        self.epsilon_closure(&next)
    }

    /// Membership by epsilon-closure state-set simulation. Symbols outside
    /// the alphabet simply kill the run (answer `false`, not an error).
    pub fn accepts(&self, word: &[Symbol]) -> bool {
        let mut set = self.epsilon_closure(&BTreeSet::from([self.initial]));
        for sym in word {
            set = self.step(&set, sym);
            if set.is_empty() {
                return false;
            }
        }
        set.iter().any(|q| self.finals.contains(q))
    }

    /// Existential membership over per-position symbol sets: true iff some
    /// word `w` with `w[i] ∈ sets[i]` is accepted. One state-set pass; the
    /// union over per-position choices is exact because choices at distinct
    /// positions are independent.
    pub fn accepts_set_word(&self, sets: &[BTreeSet<Symbol>]) -> bool {
        let mut cur = self.epsilon_closure(&BTreeSet::from([self.initial]));
        for cell in sets {
            let mut next = BTreeSet::new();
            for (from, s, to) in &self.transitions {
                if cur.contains(from) {
                    if let Some(sym) = s {
                        if cell.contains(sym) {
                            next.insert(*to);
                        }
                    }
                }
            }
            cur = self.epsilon_closure(&next);
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|q| self.finals.contains(q))
    }

    /// Language-preserving epsilon elimination.
    pub fn epsilon_free(&self) -> Nfa {
        if self.is_epsilon_free() {
            return self.clone();
        }
        let mut transitions = BTreeSet::new();
        let mut finals = BTreeSet::new();
        for q in 0..self.n_states() {
            let closure = self.epsilon_closure(&BTreeSet::from([q]));
            if closure.iter().any(|c| self.finals.contains(c)) {
                finals.insert(q);
            }
            for (from, sym, to) in &self.transitions {
                if let Some(s) = sym {
                    if closure.contains(from) {
                        transitions.insert((q, Some(s.clone()), *to));
                    }
                }
            }
        }
        Nfa {
            alphabet: self.alphabet.clone(),
            labels: self.labels.clone(),
            initial: self.initial,
            finals,
            transitions,
        }
    }

    /// True iff the automaton accepts some word using only symbols from
    /// `allowed` (epsilon moves always permitted).
    pub fn nonempty_over(&self, allowed: &BTreeSet<Symbol>) -> bool {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(q) = queue.pop_front() {
            if self.finals.contains(&q) {
                return true;
            }
            for (from, s, to) in &self.transitions {
                let ok = match s {
                    None => true,
                    Some(sym) => allowed.contains(sym),
                };
                if *from == q && ok && seen.insert(*to) {
                    queue.push_back(*to);
                }
            }
        }
        false
    }

    /// Copy with every transition symbol passed through `f`.
    pub fn relabel(&self, f: impl Fn(&Symbol) -> Symbol) -> Nfa {
        let mut alphabet = BTreeSet::new();
        let transitions = self
            .transitions
            .iter()
            .map(|(from, s, to)| {
                let s2 = s.as_ref().map(&f);
                if let Some(sym) = &s2 {
                    alphabet.insert(sym.clone());
                }
                (*from, s2, *to)
            })
            .collect();
        Nfa {
            alphabet,
            labels: self.labels.clone(),
            initial: self.initial,
            finals: self.finals.clone(),
            transitions,
        }
    }

    /// States reachable from the initial state (over all moves).
    fn reachable(&self) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(q) = queue.pop_front() {
            for (from, _, to) in &self.transitions {
                if *from == q && seen.insert(*to) {
                    queue.push_back(*to);
                }
            }
        }
        seen
    }

    /// States from which some final state is reachable.
    fn coreachable(&self) -> BTreeSet<StateId> {
        let mut seen: BTreeSet<StateId> = self.finals.clone();
        let mut queue: VecDeque<StateId> = self.finals.iter().copied().collect();
        while let Some(q) = queue.pop_front() {
            for (from, _, to) in &self.transitions {
                if *to == q && seen.insert(*from) {
                    queue.push_back(*from);
                }
            }
        }
        seen
    }

    pub fn is_empty_lang(&self) -> bool {
        !self.reachable().iter().any(|q| self.finals.contains(q))
    }

    /// Restrict to useful states (reachable and co-reachable); an empty
    /// result is canonicalized to the single-state empty-language automaton.
    pub fn trim(&self) -> Nfa {
        let useful: BTreeSet<StateId> = self
            .reachable()
            .intersection(&self.coreachable())
            .copied()
            .collect();
        if !useful.contains(&self.initial) {
            return Nfa::empty_lang(self.alphabet.clone());
        }
        let mut remap = BTreeMap::new();
        let mut labels = Vec::new();
        for q in &useful {
            remap.insert(*q, labels.len());
            labels.push(self.labels[*q].clone());
        }
        Nfa {
            alphabet: self.alphabet.clone(),
            labels,
            initial: remap[&self.initial],
            finals: self
                .finals
                .iter()
                .filter(|q| useful.contains(q))
                .map(|q| remap[q])
                .collect(),
            transitions: self
                .transitions
                .iter()
                .filter(|(f, _, t)| useful.contains(f) && useful.contains(t))
                .map(|(f, s, t)| (remap[f], s.clone(), remap[t]))
                .collect(),
        }
    }

    /// Append `other`'s states to `self`, returning the id offset. No
    /// connections are made; the caller wires initial/final states.
    pub fn append_states(&mut self, other: &Nfa) -> usize {
        let offset = self.n_states();
        self.labels.extend(other.labels.iter().cloned());
        self.alphabet.extend(other.alphabet.iter().cloned());
        for (f, s, t) in &other.transitions {
            self.transitions.insert((f + offset, s.clone(), t + offset));
        }
        offset
    }

    /// Subset construction over `over` (must contain the alphabet). The
    /// result is a complete DFA, sink included.
    pub fn determinize_over(&self, over: &BTreeSet<Symbol>, caps: &Caps) -> Result<Dfa> {
        debug_assert!(self.alphabet.is_subset(over));
        let start = self.epsilon_closure(&BTreeSet::from([self.initial]));
        let mut index: BTreeMap<BTreeSet<StateId>, StateId> = BTreeMap::new();
        let mut subsets: Vec<BTreeSet<StateId>> = Vec::new();
        let mut transitions = BTreeSet::new();
        index.insert(start.clone(), 0);
        subsets.push(start);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for sym in over {
                let next = self.step(&subsets[i].clone(), sym);
                let j = match index.get(&next) {
                    Some(j) => *j,
                    None => {
                        let j = subsets.len();
                        if j >= caps.max_det_states {
                            return Err(Error::ResourceCap(format!(
                                "subset construction exceeded {} states",
                                caps.max_det_states
                            )));
                        }
                        index.insert(next.clone(), j);
                        subsets.push(next);
                        queue.push_back(j);
                        j
                    }
                };
                transitions.insert((i, Some(sym.clone()), j));
            }
        }
        let labels = subsets
            .iter()
            .map(|s| {
                let names: Vec<&str> = s.iter().map(|q| self.labels[*q].as_str()).collect();
                format!("{{{}}}", names.join(","))
            })
            .collect();
        let finals = subsets
            .iter()
            .enumerate()
            .filter(|(_, s)| s.iter().any(|q| self.finals.contains(q)))
            .map(|(i, _)| i)
            .collect();
        Ok(Dfa(Nfa {
            alphabet: over.clone(),
            labels,
            initial: 0,
            finals,
            transitions,
        }))
    }

    pub fn determinize(&self, caps: &Caps) -> Result<Dfa> {
        self.determinize_over(&self.alphabet.clone(), caps)
    }

    /// Complement w.r.t. `over*`; requires `alphabet ⊆ over`.
    pub fn complement(&self, over: &BTreeSet<Symbol>, caps: &Caps) -> Result<Nfa> {
        if !self.alphabet.is_subset(over) {
            return Err(Error::Unsupported(
                "complement universe does not cover the alphabet".into(),
            ));
        }
        let dfa = self.determinize_over(over, caps)?;
        let mut nfa = dfa.into_nfa();
        nfa.finals = (0..nfa.n_states())
            .filter(|q| !nfa.finals.contains(q))
            .collect();
        Ok(nfa)
    }

    /// Product automaton accepting the intersection; inputs are epsilon-
    /// eliminated first.
    fn product(&self, other: &Nfa) -> Nfa {
        let a = self.epsilon_free();
        let b = other.epsilon_free();
        let alphabet: BTreeSet<Symbol> = a.alphabet.union(&b.alphabet).cloned().collect();
        let mut index = BTreeMap::new();
        let mut labels = Vec::new();
        let mut pairs = Vec::new();
        let mut transitions = BTreeSet::new();
        let start = (a.initial, b.initial);
        index.insert(start, 0);
        labels.push(format!("{}|{}", a.labels[a.initial], b.labels[b.initial]));
        pairs.push(start);
        let mut queue = VecDeque::from([0usize]);
        // Group moves by source for the pair expansion.
        let mut amoves: BTreeMap<StateId, Vec<(&Symbol, StateId)>> = BTreeMap::new();
        for (f, s, t) in &a.transitions {
            amoves.entry(*f).or_default().push((s.as_ref().unwrap(), *t));
        }
        let mut bmoves: BTreeMap<StateId, Vec<(&Symbol, StateId)>> = BTreeMap::new();
        for (f, s, t) in &b.transitions {
            bmoves.entry(*f).or_default().push((s.as_ref().unwrap(), *t));
        }
        while let Some(i) = queue.pop_front() {
            let (qa, qb) = pairs[i];
            if let (Some(am), Some(bm)) = (amoves.get(&qa), bmoves.get(&qb)) {
                for (sa, ta) in am {
                    for (sb, tb) in bm {
                        if sa == sb {
                            let key = (*ta, *tb);
                            let j = *index.entry(key).or_insert_with(|| {
                                let j = pairs.len();
                                labels.push(format!("{}|{}", a.labels[*ta], b.labels[*tb]));
                                pairs.push(key);
                                queue.push_back(j);
                                j
                            });
                            transitions.insert((i, Some((*sa).clone()), j));
                        }
                    }
                }
            }
        }
        let finals = pairs
            .iter()
            .enumerate()
            .filter(|(_, (qa, qb))| a.finals.contains(qa) && b.finals.contains(qb))
            .map(|(i, _)| i)
            .collect();
        Nfa {
            alphabet,
            labels,
            initial: 0,
            finals,
            transitions,
        }
    }

    /// Union never introduces resource use; Concat and Union are linear,
    /// Intersect is a product, Difference determinizes the right operand.
    pub fn compose(op: ComposeOp, a: &Nfa, b: &Nfa, caps: &Caps) -> Result<Nfa> {
        let alphabet: BTreeSet<Symbol> = a.alphabet.union(&b.alphabet).cloned().collect();
        match op {
            ComposeOp::Concat => {
                let mut out = a.clone();
                out.alphabet = alphabet;
                let offset = out.append_states(b);
                for f in &a.finals {
                    out.transitions.insert((*f, None, b.initial + offset));
                }
                out.finals = b.finals.iter().map(|f| f + offset).collect();
                Ok(out)
            }
            ComposeOp::Union => {
                let mut out = Nfa {
                    alphabet,
                    labels: vec!["u".into()],
                    initial: 0,
                    finals: BTreeSet::new(),
                    transitions: BTreeSet::new(),
                };
                let oa = out.append_states(a);
                let ob = out.append_states(b);
                out.transitions.insert((0, None, a.initial + oa));
                out.transitions.insert((0, None, b.initial + ob));
                out.finals = a
                    .finals
                    .iter()
                    .map(|f| f + oa)
                    .chain(b.finals.iter().map(|f| f + ob))
                    .collect();
                Ok(out)
            }
            ComposeOp::Intersect => Ok(a.product(b)),
            ComposeOp::Difference => {
                let bc = b.complement(&alphabet, caps)?;
                Ok(a.product(&bc))
            }
        }
    }

    /// Union of many automata as disjoint copies behind a fresh epsilon
    /// initial state.
    pub fn union_many(parts: &[Nfa], alphabet: BTreeSet<Symbol>) -> Nfa {
        let mut out = Nfa {
            alphabet,
            labels: vec!["u".into()],
            initial: 0,
            finals: BTreeSet::new(),
            transitions: BTreeSet::new(),
        };
        for p in parts {
            let off = out.append_states(p);
            out.transitions.insert((0, None, p.initial + off));
            out.finals.extend(p.finals.iter().map(|f| f + off));
        }
        out
    }

    /// `L(a) ⊆ L(b)`.
    pub fn includes(a: &Nfa, b: &Nfa, caps: &Caps) -> Result<bool> {
        Ok(Nfa::counterexample_included(a, b, caps)?.is_none())
    }

    /// `L(a) = L(b)`, by two inclusion checks against determinized
    /// complements.
    pub fn equivalent(a: &Nfa, b: &Nfa, caps: &Caps) -> Result<bool> {
        Ok(Nfa::includes(a, b, caps)? && Nfa::includes(b, a, caps)?)
    }

    /// Shortest word of `L(a) − L(b)`, if any.
    pub fn counterexample_included(
        a: &Nfa,
        b: &Nfa,
        caps: &Caps,
    ) -> Result<Option<Vec<Symbol>>> {
        let alphabet: BTreeSet<Symbol> = a.alphabet.union(&b.alphabet).cloned().collect();
        let bc = b.complement(&alphabet, caps)?;
        let diff = a.product(&bc);
        Ok(diff.shortest_word())
    }

    /// Shortest word a symmetric-difference check distinguishes `a` and `b`
    /// by, if they are not equivalent.
    pub fn counterexample_equivalent(
        a: &Nfa,
        b: &Nfa,
        caps: &Caps,
    ) -> Result<Option<Vec<Symbol>>> {
        if let Some(w) = Nfa::counterexample_included(a, b, caps)? {
            return Ok(Some(w));
        }
        Nfa::counterexample_included(b, a, caps)
    }

    /// Shortest accepted word (breadth-first over closure subsets).
    pub fn shortest_word(&self) -> Option<Vec<Symbol>> {
        let start = self.epsilon_closure(&BTreeSet::from([self.initial]));
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([(start, Vec::new())]);
        while let Some((set, word)) = queue.pop_front() {
            if set.iter().any(|q| self.finals.contains(q)) {
                return Some(word);
            }
            for sym in &self.alphabet {
                let next = self.step(&set, sym);
                if !next.is_empty() && seen.insert(next.clone()) {
                    let mut w = word.clone();
                    w.push(sym.clone());
                    queue.push_back((next, w));
                }
            }
        }
        None
    }

    /// Per-state successor sets after reading `w` (the relation `(q, w, q')`).
    fn word_relation(&self, w: &[Symbol]) -> Vec<BTreeSet<StateId>> {
        debug_assert!(self.is_epsilon_free());
        let mut rel: Vec<BTreeSet<StateId>> =
            (0..self.n_states()).map(|q| BTreeSet::from([q])).collect();
        for sym in w {
            rel = self.advance_relation(&rel, |s| s == sym);
        }
        rel
    }

    fn advance_relation(
        &self,
        rel: &[BTreeSet<StateId>],
        admit: impl Fn(&Symbol) -> bool,
    ) -> Vec<BTreeSet<StateId>> {
        let mut succ: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); self.n_states()];
        for (f, s, t) in &self.transitions {
            if admit(s.as_ref().unwrap()) {
                succ[*f].insert(*t);
            }
        }
        rel.iter()
            .map(|set| {
                let mut out = BTreeSet::new();
                for q in set {
                    out.extend(succ[*q].iter().copied());
                }
                out
            })
            .collect()
    }

    /// `Ini(A, w)` and `Fin(A, w)`: states that start, resp. end, a reading
    /// of `w`. For the empty word both are the full state set. Requires an
    /// epsilon-free automaton.
    pub fn delimiter_states(&self, w: &[Symbol]) -> (BTreeSet<StateId>, BTreeSet<StateId>) {
        assert!(self.is_epsilon_free(), "delimiters need an epsilon-free automaton");
        if w.is_empty() {
            let all: BTreeSet<StateId> = (0..self.n_states()).collect();
            return (all.clone(), all);
        }
        let rel = self.word_relation(w);
        let ini = rel
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(q, _)| q)
            .collect();
        let fin = rel.iter().flatten().copied().collect();
        (ini, fin)
    }

    /// Box variant of `delimiter_states`, computed cell by cell by relation
    /// composition (never enumerating the box language).
    pub fn box_delimiters(&self, b: &BoxLang) -> (BTreeSet<StateId>, BTreeSet<StateId>) {
        assert!(self.is_epsilon_free(), "delimiters need an epsilon-free automaton");
        if b.width() == 0 {
            let all: BTreeSet<StateId> = (0..self.n_states()).collect();
            return (all.clone(), all);
        }
        let mut rel: Vec<BTreeSet<StateId>> =
            (0..self.n_states()).map(|q| BTreeSet::from([q])).collect();
        for cell in b.cells() {
            rel = self.advance_relation(&rel, |s| cell.contains(s));
        }
        let ini = rel
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(q, _)| q)
            .collect();
        let fin = rel.iter().flatten().copied().collect();
        (ini, fin)
    }

    /// All pairs `(q, q')` such that some reading of `w` leads from `q` to
    /// `q'`. The empty word relates every state to itself.
    pub fn word_pairs(&self, w: &[Symbol]) -> BTreeSet<(StateId, StateId)> {
        assert!(self.is_epsilon_free(), "pair relations need an epsilon-free automaton");
        let rel = self.word_relation(w);
        rel.iter()
            .enumerate()
            .flat_map(|(q, set)| set.iter().map(move |t| (q, *t)))
            .collect()
    }

    /// All pairs `(q, q')` connected by some word of the box, computed by
    /// relation composition cell by cell.
    pub fn box_pairs(&self, b: &BoxLang) -> BTreeSet<(StateId, StateId)> {
        assert!(self.is_epsilon_free(), "pair relations need an epsilon-free automaton");
        let mut rel: Vec<BTreeSet<StateId>> =
            (0..self.n_states()).map(|q| BTreeSet::from([q])).collect();
        for cell in b.cells() {
            rel = self.advance_relation(&rel, |s| cell.contains(s));
        }
        rel.iter()
            .enumerate()
            .flat_map(|(q, set)| set.iter().map(move |t| (q, *t)))
            .collect()
    }

    /// The local automaton `A(qi, qf)`: initial `qi`, single final `qf`, and
    /// exactly the moves lying on some path from `qi` to `qf`. States and
    /// labels are kept as in `self` so composite constructions can match
    /// states across local automata.
    pub fn local_automaton(&self, qi: StateId, qf: StateId) -> Nfa {
        assert!(self.is_epsilon_free(), "local automata need an epsilon-free automaton");
        let mut from_qi = BTreeSet::from([qi]);
        let mut queue = VecDeque::from([qi]);
        while let Some(q) = queue.pop_front() {
            for (f, _, t) in &self.transitions {
                if *f == q && from_qi.insert(*t) {
                    queue.push_back(*t);
                }
            }
        }
        let mut to_qf = BTreeSet::from([qf]);
        let mut queue = VecDeque::from([qf]);
        while let Some(q) = queue.pop_front() {
            for (f, _, t) in &self.transitions {
                if *t == q && to_qf.insert(*f) {
                    queue.push_back(*f);
                }
            }
        }
        let transitions = self
            .transitions
            .iter()
            .filter(|(f, _, t)| from_qi.contains(f) && to_qf.contains(t))
            .cloned()
            .collect();
        Nfa {
            alphabet: self.alphabet.clone(),
            labels: self.labels.clone(),
            initial: qi,
            finals: BTreeSet::from([qf]),
            transitions,
        }
    }
}

/// Unique minimal complete DFA (Moore refinement; states numbered in
/// breadth-first order from the initial state over the sorted alphabet).
pub fn minimize(d: &Dfa) -> Dfa {
    let nfa = d.as_nfa();
    let alphabet: Vec<Symbol> = nfa.alphabet.iter().cloned().collect();
    // Complete with a sink, restrict to reachable states.
    let mut delta: BTreeMap<(StateId, usize), StateId> = BTreeMap::new();
    let sym_idx: BTreeMap<&Symbol, usize> =
        alphabet.iter().enumerate().map(|(i, s)| (s, i)).collect();
    for (f, s, t) in &nfa.transitions {
        delta.insert((*f, sym_idx[s.as_ref().unwrap()]), *t);
    }
    let n = nfa.n_states();
    let sink = n;
    let total = n + 1;
    let full = |q: StateId, a: usize| -> StateId { *delta.get(&(q, a)).unwrap_or(&sink) };
    let mut reach = BTreeSet::from([nfa.initial]);
    let mut queue = VecDeque::from([nfa.initial]);
    while let Some(q) = queue.pop_front() {
        for a in 0..alphabet.len() {
            let t = full(q, a);
            if reach.insert(t) {
                queue.push_back(t);
            }
        }
    }
    // Moore partition refinement over reachable states.
    let mut class: Vec<usize> = (0..total)
        .map(|q| if q != sink && nfa.finals.contains(&q) { 1 } else { 0 })
        .collect();
    loop {
        let mut signature: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut next: Vec<usize> = vec![0; total];
        for q in &reach {
            let sig = (
                class[*q],
                (0..alphabet.len()).map(|a| class[full(*q, a)]).collect::<Vec<_>>(),
            );
            let id = signature.len();
            let c = *signature.entry(sig).or_insert(id);
            next[*q] = c;
        }
        let changed = reach.iter().any(|q| next[*q] != class[*q]);
        class = next;
        if !changed {
            break;
        }
    }
    // Canonical numbering by BFS over classes.
    let mut order: BTreeMap<usize, StateId> = BTreeMap::new();
    let mut labels = Vec::new();
    let mut transitions = BTreeSet::new();
    let mut finals = BTreeSet::new();
    let mut repr: BTreeMap<usize, StateId> = BTreeMap::new();
    for q in &reach {
        repr.entry(class[*q]).or_insert(*q);
    }
    let c0 = class[nfa.initial];
    order.insert(c0, 0);
    labels.push("m0".to_string());
    let mut queue = VecDeque::from([c0]);
    while let Some(c) = queue.pop_front() {
        let q = repr[&c];
        for (a, sym) in alphabet.iter().enumerate() {
            let tc = class[full(q, a)];
            let id = match order.get(&tc) {
                Some(id) => *id,
                None => {
                    let id = order.len();
                    order.insert(tc, id);
                    labels.push(format!("m{id}"));
                    queue.push_back(tc);
                    id
                }
            };
            transitions.insert((order[&c], Some(sym.clone()), id));
        }
    }
    for q in &reach {
        if *q != sink && nfa.finals.contains(q) {
            finals.insert(order[&class[*q]]);
        }
    }
    Dfa(Nfa {
        alphabet: nfa.alphabet.clone(),
        labels,
        initial: 0,
        finals,
        transitions,
    })
}

/// Minimal complete DFA of an arbitrary automaton.
pub fn canonical_dfa(a: &Nfa, caps: &Caps) -> Result<Dfa> {
    Ok(minimize(&a.epsilon_free().determinize(caps)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::{parse_regex, to_nfa};

    fn caps() -> Caps {
        Caps::default()
    }

    fn nfa(expr: &str) -> Nfa {
        to_nfa(&parse_regex(expr, &caps()).unwrap())
    }

    fn syms(s: &str) -> Vec<Symbol> {
        s.split_whitespace().map(|x| x.to_string()).collect()
    }

    #[test]
    fn accepts_simulates_closure() {
        let a = nfa("b*");
        assert!(a.accepts(&syms("b b")));
        assert!(a.accepts(&[]));
        let chain = nfa("a (b c)* d");
        assert!(chain.accepts(&syms("a b c b c d")));
        assert!(!chain.accepts(&syms("a b c b d")));
    }

    #[test]
    fn compose_matches_set_algebra() {
        let concat = Nfa::compose(ComposeOp::Concat, &nfa("b*"), &nfa("d*"), &caps()).unwrap();
        assert!(concat.accepts(&syms("b b d")));
        assert!(concat.accepts(&[]));

        let inter = Nfa::compose(
            ComposeOp::Intersect,
            &nfa("a b + b a"),
            &nfa("a (a + b)"),
            &caps(),
        )
        .unwrap();
        assert!(inter.accepts(&syms("a b")));
        assert!(!inter.accepts(&syms("b a")));
        assert!(!inter.accepts(&syms("a a")));

        let diff = Nfa::compose(
            ComposeOp::Difference,
            &nfa("(a b)*"),
            &nfa("(a b)+"),
            &caps(),
        )
        .unwrap();
        assert!(diff.accepts(&[]));
        assert!(!diff.accepts(&syms("a b")));
        assert!(diff.shortest_word() == Some(vec![]));
    }

    #[test]
    fn complement_flips_membership() {
        let empty = Nfa::empty_lang(BTreeSet::from(["a".to_string()]));
        let c = empty.complement(&BTreeSet::from(["a".to_string()]), &caps()).unwrap();
        assert!(c.accepts(&syms("a a a")));

        let astar = nfa("a*");
        let over: BTreeSet<Symbol> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let c = astar.complement(&over, &caps()).unwrap();
        assert!(c.accepts(&syms("b")));
        assert!(!c.accepts(&[]));

        let chain = nfa("a b c c d e");
        let over: BTreeSet<Symbol> =
            ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
        let c = chain.complement(&over, &caps()).unwrap();
        assert!(!c.accepts(&syms("a b c c d e")));
        assert!(c.accepts(&syms("a b c d e")));
    }

    #[test]
    fn equivalence_and_inclusion() {
        let lhs = Nfa::compose(ComposeOp::Concat, &nfa("a* b c*"), &nfa("c*"), &caps()).unwrap();
        assert!(Nfa::equivalent(&lhs, &nfa("a* b c*"), &caps()).unwrap());
        assert!(Nfa::includes(&nfa("(a b)+"), &nfa("(a b)*"), &caps()).unwrap());
        assert!(!Nfa::includes(&nfa("(a b)*"), &nfa("(a b)+"), &caps()).unwrap());
        assert!(Nfa::includes(&nfa("a b"), &nfa("(a b)*"), &caps()).unwrap());
        assert!(!Nfa::equivalent(&nfa("a b"), &nfa("(a b)*"), &caps()).unwrap());
    }

    #[test]
    fn determinize_and_minimize_preserve_language() {
        let a = nfa("(a + b)* b");
        let d = a.determinize(&caps()).unwrap();
        // exhaustive cross-check on short words
        let alpha: Vec<Symbol> = a.alphabet.iter().cloned().collect();
        let mut words = vec![Vec::new()];
        for _ in 0..6 {
            let mut next = Vec::new();
            for w in &words {
                for s in &alpha {
                    let mut w2 = w.clone();
                    w2.push(s.clone());
                    next.push(w2);
                }
            }
            for w in &next {
                assert_eq!(a.accepts(w), d.as_nfa().accepts(w));
            }
            words = next;
        }
        let m = minimize(&d);
        assert!(Nfa::equivalent(m.as_nfa(), &a, &caps()).unwrap());
        // a+a has two live states plus the sink
        let m2 = minimize(&nfa("a + a").determinize(&caps()).unwrap());
        assert_eq!(m2.n_states(), 3);
    }

    #[test]
    fn minimal_dfa_is_canonical() {
        let m1 = canonical_dfa(&nfa("(a b)* a + (a b)*"), &caps()).unwrap();
        let m2 = canonical_dfa(&nfa("(a b)* (a + %e)"), &caps()).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn delimiters_per_definition() {
        let chain = canonical_dfa(&nfa("a b c c d e"), &caps()).unwrap().into_nfa();
        let all: BTreeSet<StateId> = (0..chain.n_states()).collect();
        assert_eq!(chain.delimiter_states(&[]), (all.clone(), all));
        let (ini, fin) = chain.delimiter_states(&syms("a"));
        // every state reads `a` in a complete DFA; the interesting fact is
        // where the non-sink read lands
        assert!(ini.contains(&chain.initial));
        let after_a = chain
            .transitions
            .iter()
            .find(|(f, s, _)| *f == chain.initial && s.as_deref() == Some("a"))
            .map(|(_, _, t)| *t)
            .unwrap();
        assert!(fin.contains(&after_a));
        // brute-force cross-check of the definition on all state pairs
        let w = syms("c c");
        let (ini, fin) = chain.delimiter_states(&w);
        for q in 0..chain.n_states() {
            let reach_w: Vec<StateId> = (0..chain.n_states())
                .filter(|t| {
                    let mut local = chain.clone();
                    local.initial = q;
                    local.finals = BTreeSet::from([*t]);
                    local.accepts(&w)
                })
                .collect();
            assert_eq!(ini.contains(&q), !reach_w.is_empty());
            for t in reach_w {
                assert!(fin.contains(&t));
            }
        }
    }

    #[test]
    fn local_automaton_language() {
        let a = canonical_dfa(&nfa("a (b c)* d"), &caps()).unwrap().into_nfa();
        let q1 = a
            .transitions
            .iter()
            .find(|(f, s, _)| *f == a.initial && s.as_deref() == Some("a"))
            .map(|(_, _, t)| *t)
            .unwrap();
        let local = a.local_automaton(q1, q1);
        assert!(local.accepts(&[]));
        assert!(local.accepts(&syms("b c")));
        assert!(local.accepts(&syms("b c b c")));
        assert!(!local.accepts(&syms("b")));
        assert!(Nfa::equivalent(&local, &nfa("(b c)*"), &caps()).unwrap());
        // qi = qf without a cycle: {epsilon}
        let chain = canonical_dfa(&nfa("a b"), &caps()).unwrap().into_nfa();
        let local = chain.local_automaton(chain.initial, chain.initial);
        assert!(Nfa::equivalent(&local, &nfa("%e"), &caps()).unwrap());
    }

    #[test]
    fn box_delimiters_match_enumeration() {
        let a = nfa("a b + a c").epsilon_free();
        let b = BoxLang::new(vec![
            BTreeSet::from(["a".to_string()]),
            BTreeSet::from(["b".to_string(), "c".to_string()]),
        ])
        .unwrap();
        let (ini, fin) = a.box_delimiters(&b);
        let mut expect_ini = BTreeSet::new();
        let mut expect_fin = BTreeSet::new();
        for w in [syms("a b"), syms("a c")] {
            let (i, f) = a.delimiter_states(&w);
            expect_ini.extend(i);
            expect_fin.extend(f);
        }
        assert_eq!(ini, expect_ini);
        assert_eq!(fin, expect_fin);
        // width-0 box: all states
        let empty = BoxLang::new(vec![]).unwrap();
        let all: BTreeSet<StateId> = (0..a.n_states()).collect();
        assert_eq!(a.box_delimiters(&empty), (all.clone(), all));
        // a cell symbol outside the alphabet contributes nothing
        let b = BoxLang::new(vec![BTreeSet::from(["z".to_string()])]).unwrap();
        let (ini, fin) = a.box_delimiters(&b);
        assert!(ini.is_empty() && fin.is_empty());
    }

    #[test]
    fn complement_is_involution() {
        for expr in ["(a b)*", "a* b", "a + b a"] {
            let a = nfa(expr);
            let over = a.alphabet.clone();
            let cc = a
                .complement(&over, &caps())
                .unwrap()
                .complement(&over, &caps())
                .unwrap();
            assert!(Nfa::equivalent(&a, &cc, &caps()).unwrap());
        }
    }
}

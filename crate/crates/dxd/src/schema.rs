//! Grammar classes over unranked trees: flat grammars, single-type and
//! fully specialized ones, plus the machinery they share: duals, bound
//! marking, reduction, tree-automaton saturation, normalization, and
//! grammar equivalence.

use crate::automata::{minimize, Nfa};
use crate::document::UTree;
use crate::regex::{is_dre, nfa_to_regex, parse_regex, print_regex, to_dre, to_nfa, RegexAst};
use crate::{mu, Caps, Error, Result, Symbol};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrammarClass {
    Dtd,
    Sdtd,
    Edtd,
}

impl GrammarClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            GrammarClass::Dtd => "dtd",
            GrammarClass::Sdtd => "sdtd",
            GrammarClass::Edtd => "edtd",
        }
    }
}

/// Content-model mechanism: expressions (deterministic or not) or machines
/// (deterministic or not).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    Dre,
    Nre,
    Dfa,
    Nfa,
}

impl Mechanism {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Dre => "dre",
            Mechanism::Nre => "nre",
            Mechanism::Dfa => "dfa",
            Mechanism::Nfa => "nfa",
        }
    }
}

/// A content model: expression-backed models keep their tree, machine-backed
/// ones only the automaton.
#[derive(Clone, Debug)]
pub struct ContentModel {
    pub ast: Option<RegexAst>,
    machine: Nfa,
}

impl ContentModel {
    pub fn from_ast(ast: RegexAst) -> ContentModel {
        let machine = to_nfa(&ast);
        ContentModel {
            ast: Some(ast),
            machine,
        }
    }

    pub fn from_machine(machine: Nfa) -> ContentModel {
        ContentModel { ast: None, machine }
    }

    pub fn epsilon() -> ContentModel {
        ContentModel::from_ast(RegexAst::Epsilon)
    }

    pub fn nfa(&self) -> &Nfa {
        &self.machine
    }

    /// Symbols occurring in the model (for machines: on useful transitions).
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        match &self.ast {
            Some(ast) => ast.symbols(),
            None => self
                .machine
                .trim()
                .transitions
                .iter()
                .filter_map(|(_, s, _)| s.clone())
                .collect(),
        }
    }

    pub fn accepts_epsilon(&self) -> bool {
        self.machine.accepts(&[])
    }

    /// Model with every symbol outside `keep` made impossible.
    pub fn restrict(&self, keep: &BTreeSet<Symbol>) -> ContentModel {
        match &self.ast {
            Some(ast) => ContentModel::from_ast(simplify(&substitute_empty(ast, keep))),
            None => {
                let mut m = self.machine.clone();
                m.transitions
                    .retain(|(_, s, _)| s.as_ref().map(|x| keep.contains(x)).unwrap_or(true));
                m.alphabet = m.alphabet.intersection(keep).cloned().collect();
                ContentModel::from_machine(m.trim())
            }
        }
    }

    pub fn display(&self, caps: &Caps) -> Result<String> {
        match &self.ast {
            Some(ast) => Ok(print_regex(ast)),
            None => Ok(print_regex(&nfa_to_regex(&self.machine, caps)?)),
        }
    }
}

fn substitute_empty(r: &RegexAst, keep: &BTreeSet<Symbol>) -> RegexAst {
    match r {
        RegexAst::Sym(s) if !keep.contains(s) => RegexAst::EmptySet,
        RegexAst::Concat(l, rr) => RegexAst::Concat(
            Box::new(substitute_empty(l, keep)),
            Box::new(substitute_empty(rr, keep)),
        ),
        RegexAst::Alt(l, rr) => RegexAst::Alt(
            Box::new(substitute_empty(l, keep)),
            Box::new(substitute_empty(rr, keep)),
        ),
        RegexAst::Opt(x) => RegexAst::Opt(Box::new(substitute_empty(x, keep))),
        RegexAst::Plus(x) => RegexAst::Plus(Box::new(substitute_empty(x, keep))),
        RegexAst::Star(x) => RegexAst::Star(Box::new(substitute_empty(x, keep))),
        other => other.clone(),
    }
}

/// Fold the empty set and epsilon through the operators. Dropping
/// alternatives never breaks expression determinism.
pub fn simplify(r: &RegexAst) -> RegexAst {
    match r {
        RegexAst::Concat(l, rr) => match (simplify(l), simplify(rr)) {
            (RegexAst::EmptySet, _) | (_, RegexAst::EmptySet) => RegexAst::EmptySet,
            (RegexAst::Epsilon, x) | (x, RegexAst::Epsilon) => x,
            (a, b) => RegexAst::Concat(Box::new(a), Box::new(b)),
        },
        RegexAst::Alt(l, rr) => match (simplify(l), simplify(rr)) {
            (RegexAst::EmptySet, x) | (x, RegexAst::EmptySet) => x,
            (a, b) => RegexAst::Alt(Box::new(a), Box::new(b)),
        },
        RegexAst::Opt(x) => match simplify(x) {
            RegexAst::EmptySet | RegexAst::Epsilon => RegexAst::Epsilon,
            a => RegexAst::Opt(Box::new(a)),
        },
        RegexAst::Star(x) => match simplify(x) {
            RegexAst::EmptySet | RegexAst::Epsilon => RegexAst::Epsilon,
            a => RegexAst::Star(Box::new(a)),
        },
        RegexAst::Plus(x) => match simplify(x) {
            RegexAst::EmptySet => RegexAst::EmptySet,
            RegexAst::Epsilon => RegexAst::Epsilon,
            a => RegexAst::Plus(Box::new(a)),
        },
        other => other.clone(),
    }
}

/// A grammar of one of the three classes. `names` lists the specialized
/// element names in document order; the base symbol of a name is everything
/// before the first `#`.
#[derive(Clone, Debug)]
pub struct Grammar {
    pub class: GrammarClass,
    pub mech: Mechanism,
    pub names: Vec<Symbol>,
    pub rules: BTreeMap<Symbol, ContentModel>,
    pub root: Symbol,
    /// set by `load_schema`: the input satisfied all three reducedness
    /// conditions as given
    pub was_reduced: bool,
}

impl Grammar {
    /// Build from ordered rules; names occurring only on right-hand sides
    /// become epsilon leaves.
    pub fn assemble(
        class: GrammarClass,
        mech: Mechanism,
        root: Symbol,
        rules: Vec<(Symbol, ContentModel)>,
    ) -> Grammar {
        let mut names = Vec::new();
        let mut map = BTreeMap::new();
        for (name, model) in rules {
            if !map.contains_key(&name) {
                names.push(name.clone());
            }
            map.insert(name, model);
        }
        let occurring: Vec<Symbol> = names
            .iter()
            .flat_map(|n| map[n].symbols())
            .collect();
        for name in occurring.into_iter().chain([root.clone()]) {
            if !map.contains_key(&name) {
                names.push(name.clone());
                map.insert(name, ContentModel::epsilon());
            }
        }
        Grammar {
            class,
            mech,
            names,
            rules: map,
            root,
            was_reduced: true,
        }
    }

    /// Base element symbols.
    pub fn alphabet(&self) -> BTreeSet<Symbol> {
        self.names.iter().map(|n| mu(n).to_string()).collect()
    }

    /// At most one specialization of each element symbol occurs in any
    /// single content model.
    pub fn is_single_type(&self) -> bool {
        self.names.iter().all(|n| {
            let mut bases = BTreeSet::new();
            self.rules[n].symbols().iter().all(|s| bases.insert(mu(s).to_string()))
        })
    }
}

// ----------------------------------------------------------------- parsing

/// Parse the textual form without reducing.
pub fn parse_schema(text: &str, caps: &Caps) -> Result<Grammar> {
    let mut class = None;
    let mut mech = Mechanism::Dre;
    let mut root = None;
    let mut rules: Vec<(Symbol, ContentModel)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        let err = |msg: String| Error::Syntax {
            pos: lineno + 1,
            msg,
        };
        if let Some(v) = line.strip_prefix("class:") {
            class = Some(match v.trim() {
                "dtd" => GrammarClass::Dtd,
                "sdtd" => GrammarClass::Sdtd,
                "edtd" => GrammarClass::Edtd,
                other => return Err(err(format!("unknown class `{other}`"))),
            });
        } else if let Some(v) = line.strip_prefix("mechanism:") {
            mech = match v.trim() {
                "dre" => Mechanism::Dre,
                "nre" => Mechanism::Nre,
                "dfa" => Mechanism::Dfa,
                "nfa" => Mechanism::Nfa,
                other => return Err(err(format!("unknown mechanism `{other}`"))),
            };
        } else if let Some(v) = line.strip_prefix("root:") {
            root = Some(v.trim().to_string());
        } else if let Some((name, rhs)) = line.split_once("->") {
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(err("rule without a name".into()));
            }
            if !seen.insert(name.clone()) {
                return Err(err(format!("two rules for `{name}`")));
            }
            let rhs = rhs.trim();
            let ast = if rhs.is_empty() {
                RegexAst::Epsilon
            } else {
                parse_regex(rhs, caps)?
            };
            rules.push((name, ContentModel::from_ast(ast)));
        } else {
            return Err(err(format!("cannot read line `{line}`")));
        }
    }
    let class = class.ok_or(Error::Syntax {
        pos: 0,
        msg: "missing `class:` line".into(),
    })?;
    let root = root.ok_or(Error::Syntax {
        pos: 0,
        msg: "missing `root:` line".into(),
    })?;
    // realize the declared mechanism
    let rules = rules
        .into_iter()
        .map(|(name, model)| {
            let model = match mech {
                Mechanism::Dre => {
                    let ast = model.ast.as_ref().unwrap();
                    if !is_dre(ast) {
                        return Err(Error::NotDre(format!(
                            "content model of `{name}` is not deterministic: {}",
                            print_regex(ast)
                        )));
                    }
                    model
                }
                Mechanism::Nre => model,
                Mechanism::Dfa => ContentModel::from_machine(
                    minimize(&model.nfa().determinize(caps)?).into_nfa(),
                ),
                Mechanism::Nfa => ContentModel::from_machine(model.nfa().clone()),
            };
            Ok((name, model))
        })
        .collect::<Result<Vec<_>>>()?;
    let g = Grammar::assemble(class, mech, root, rules);
    match class {
        GrammarClass::Dtd => {
            if let Some(bad) = g.names.iter().find(|n| mu(n) != n.as_str()) {
                return Err(Error::Unsupported(format!(
                    "flat grammar uses specialized name `{bad}`"
                )));
            }
        }
        GrammarClass::Sdtd => {
            if !g.is_single_type() {
                return Err(Error::Unsupported(
                    "grammar declared single-type mixes specializations of one element in a content model"
                        .into(),
                ));
            }
        }
        GrammarClass::Edtd => {}
    }
    Ok(g)
}

/// Parse, then reduce if needed; `was_reduced` records whether the input
/// already satisfied the reducedness conditions.
pub fn load_schema(text: &str, caps: &Caps) -> Result<Grammar> {
    let g = parse_schema(text, caps)?;
    if is_reduced(&g) {
        Ok(Grammar {
            was_reduced: true,
            ..g
        })
    } else {
        let mut r = reduce(&g)?;
        r.was_reduced = false;
        Ok(r)
    }
}

pub fn print_schema(g: &Grammar, caps: &Caps) -> Result<String> {
    let mut out = format!(
        "class: {}\nmechanism: {}\nroot: {}\n",
        g.class.as_str(),
        g.mech.as_str(),
        g.root
    );
    for name in &g.names {
        let model = &g.rules[name];
        let is_eps = match &model.ast {
            Some(RegexAst::Epsilon) => true,
            Some(_) => false,
            None => model.accepts_epsilon() && model.symbols().is_empty(),
        };
        if !is_eps {
            out.push_str(&format!("{} -> {}\n", name, model.display(caps)?));
        }
    }
    Ok(out)
}

// ------------------------------------------------------ dual and reduction

/// The dual automaton over ancestor strings: one state per name plus a
/// fresh initial, edges labeled by base symbols, finals = names whose
/// content admits the empty word.
pub fn dual(g: &Grammar) -> Nfa {
    let mut labels = vec!["q0".to_string()];
    labels.extend(g.names.iter().cloned());
    let idx: BTreeMap<&Symbol, usize> = g.names.iter().enumerate().map(|(i, n)| (n, i + 1)).collect();
    let mut transitions = BTreeSet::new();
    transitions.insert((0usize, Some(mu(&g.root).to_string()), idx[&g.root]));
    for name in &g.names {
        for occ in g.rules[name].symbols() {
            if let Some(t) = idx.get(&occ) {
                transitions.insert((idx[name], Some(mu(&occ).to_string()), *t));
            }
        }
    }
    let finals = g
        .names
        .iter()
        .filter(|n| g.rules[*n].accepts_epsilon())
        .map(|n| idx[n])
        .collect();
    Nfa {
        alphabet: g.alphabet(),
        labels,
        initial: 0,
        finals,
        transitions,
    }
}

/// Names that derive at least one finite tree (least fixed point).
pub fn mark_bound(g: &Grammar) -> BTreeSet<Symbol> {
    let mut bound: BTreeSet<Symbol> = BTreeSet::new();
    loop {
        let mut grew = false;
        for name in &g.names {
            if !bound.contains(name) && g.rules[name].nfa().nonempty_over(&bound) {
                bound.insert(name.clone());
                grew = true;
            }
        }
        if !grew {
            return bound;
        }
    }
}

fn reachable_names(g: &Grammar, rules: &BTreeMap<Symbol, ContentModel>) -> BTreeSet<Symbol> {
    let mut seen = BTreeSet::from([g.root.clone()]);
    let mut queue = VecDeque::from([g.root.clone()]);
    while let Some(n) = queue.pop_front() {
        if let Some(model) = rules.get(&n) {
            for occ in model.symbols() {
                if rules.contains_key(&occ) && seen.insert(occ.clone()) {
                    queue.push_back(occ);
                }
            }
        }
    }
    seen
}

/// The three conditions at once: every name reachable from the root, every
/// name bound, hence the language nonempty.
pub fn is_reduced(g: &Grammar) -> bool {
    let bound = mark_bound(g);
    if bound.len() != g.names.len() {
        return false;
    }
    reachable_names(g, &g.rules).len() == g.names.len()
}

/// Remove unprofitable names, rewriting content models so removed names
/// cannot occur. Errors when the grammar derives no tree at all.
pub fn reduce(g: &Grammar) -> Result<Grammar> {
    let bound = mark_bound(g);
    if !bound.contains(&g.root) {
        return Err(Error::EmptyLanguage(
            "the grammar derives no finite tree".into(),
        ));
    }
    let restricted: BTreeMap<Symbol, ContentModel> = g
        .names
        .iter()
        .filter(|n| bound.contains(*n))
        .map(|n| (n.clone(), g.rules[n].restrict(&bound)))
        .collect();
    let keep = reachable_names(g, &restricted);
    let names: Vec<Symbol> = g.names.iter().filter(|n| keep.contains(*n)).cloned().collect();
    let rules = names
        .iter()
        .map(|n| (n.clone(), restricted[n].clone()))
        .collect();
    Ok(Grammar {
        class: g.class,
        mech: g.mech,
        names,
        rules,
        root: g.root.clone(),
        was_reduced: g.was_reduced,
    })
}

// --------------------------------------------------- unranked tree automata

/// Nondeterministic unranked tree automaton; states are indices into
/// `names`, horizontal automata read name strings.
#[derive(Clone, Debug)]
pub struct Nuta {
    pub names: Vec<Symbol>,
    pub bases: Vec<Symbol>,
    pub horiz: Vec<Nfa>,
    pub finals: BTreeSet<usize>,
}

pub fn to_uta(g: &Grammar) -> Nuta {
    let names = g.names.clone();
    let bases = names.iter().map(|n| mu(n).to_string()).collect();
    let horiz = names.iter().map(|n| g.rules[n].nfa().epsilon_free()).collect();
    let root = names.iter().position(|n| *n == g.root).expect("root is a name");
    Nuta {
        names,
        bases,
        horiz,
        finals: BTreeSet::from([root]),
    }
}

/// Per-base deterministic transition structure discovered by saturation:
/// macro states track every member name's horizontal run at once, so each
/// macro state knows the exact set of names accepting there.
#[derive(Clone, Debug)]
pub struct BaseMachine {
    pub base: Symbol,
    pub members: Vec<usize>,
    pub initial: usize,
    pub n_states: usize,
    /// (macro state, subset id) -> macro state
    pub delta: BTreeMap<(usize, usize), usize>,
    /// per macro state: global name ids whose run accepts
    pub yields: Vec<BTreeSet<usize>>,
}

/// Joint bottom-up saturation of several tree automata: discovers every
/// realizable "derivable name set" over the union name space, with one
/// witness tree per set.
#[derive(Clone, Debug)]
pub struct Saturation {
    /// global name id -> (machine index, local name index)
    pub origin: Vec<(usize, usize)>,
    /// original (unprefixed) name per global id
    pub locals: Vec<Symbol>,
    pub bases: Vec<Symbol>,
    pub subsets: Vec<BTreeSet<usize>>,
    pub witnesses: Vec<UTree>,
    pub base_machines: BTreeMap<Symbol, BaseMachine>,
}

fn lifted_step(
    moves: &BTreeMap<(usize, usize), BTreeSet<usize>>,
    set: &BTreeSet<usize>,
    subset: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    let mut next = BTreeSet::new();
    for q in set {
        for g in subset {
            if let Some(ts) = moves.get(&(*q, *g)) {
                next.extend(ts.iter().copied());
            }
        }
    }
    next
}

pub fn saturate(machines: &[&Nuta], caps: &Caps) -> Result<Saturation> {
    // global name space
    let mut origin = Vec::new();
    let mut locals = Vec::new();
    let mut bases = Vec::new();
    let mut horiz: Vec<Nfa> = Vec::new();
    for (mi, u) in machines.iter().enumerate() {
        for (li, name) in u.names.iter().enumerate() {
            origin.push((mi, li));
            locals.push(name.clone());
            bases.push(u.bases[li].clone());
            horiz.push(u.horiz[li].epsilon_free());
        }
    }
    // per machine: local name string -> global id, to key horizontal moves
    let mut name_to_global: Vec<BTreeMap<&Symbol, usize>> = vec![BTreeMap::new(); machines.len()];
    for (gid, (mi, li)) in origin.iter().enumerate() {
        name_to_global[*mi].insert(&machines[*mi].names[*li], gid);
    }
    // per global name: horizontal moves keyed by (state, read global id)
    let moves: Vec<BTreeMap<(usize, usize), BTreeSet<usize>>> = horiz
        .iter()
        .enumerate()
        .map(|(gid, nfa)| {
            let mi = origin[gid].0;
            let mut m: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
            for (f, s, t) in &nfa.transitions {
                if let Some(read) = name_to_global[mi].get(s.as_ref().unwrap()) {
                    m.entry((*f, *read)).or_default().insert(*t);
                }
            }
            m
        })
        .collect();

    let all_bases: BTreeSet<Symbol> = bases.iter().cloned().collect();
    let members_of: BTreeMap<&Symbol, Vec<usize>> = {
        let mut m: BTreeMap<&Symbol, Vec<usize>> = BTreeMap::new();
        for (gid, b) in bases.iter().enumerate() {
            m.entry(b).or_default().push(gid);
        }
        m
    };

    let mut subsets: Vec<BTreeSet<usize>> = Vec::new();
    let mut sindex: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    let mut witnesses: Vec<UTree> = Vec::new();

    // one BFS over macro states of `base`, reading subset symbols < alpha_len
    let explore = |base: &Symbol,
                   subsets: &mut Vec<BTreeSet<usize>>,
                   sindex: &mut BTreeMap<BTreeSet<usize>, usize>,
                   witnesses: &mut Vec<UTree>,
                   record: bool|
     -> Result<Option<BaseMachine>> {
        let members = members_of[base].clone();
        let alpha_len = subsets.len();
        let initial: Vec<BTreeSet<usize>> = members
            .iter()
            .map(|g| BTreeSet::from([horiz[*g].initial]))
            .collect();
        let mut states: Vec<Vec<BTreeSet<usize>>> = vec![initial.clone()];
        let mut index: BTreeMap<Vec<BTreeSet<usize>>, usize> = BTreeMap::from([(initial, 0)]);
        let mut parent: Vec<Option<(usize, usize)>> = vec![None];
        let mut delta: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut queue = VecDeque::from([0usize]);
        let mut yields: Vec<BTreeSet<usize>> = Vec::new();
        let note_yield = |mstate: usize,
                          states: &Vec<Vec<BTreeSet<usize>>>,
                          parent: &Vec<Option<(usize, usize)>>,
                          subsets: &mut Vec<BTreeSet<usize>>,
                          sindex: &mut BTreeMap<BTreeSet<usize>, usize>,
                          witnesses: &mut Vec<UTree>|
         -> Result<BTreeSet<usize>> {
            let tuple = &states[mstate];
            let mut y = BTreeSet::new();
            for (j, g) in members.iter().enumerate() {
                if tuple[j].iter().any(|q| horiz[*g].finals.contains(q)) {
                    y.insert(*g);
                }
            }
            if !y.is_empty() && !sindex.contains_key(&y) {
                if subsets.len() >= caps.max_det_states {
                    return Err(Error::ResourceCap(format!(
                        "saturation exceeded {} derivable-name sets",
                        caps.max_det_states
                    )));
                }
                // reconstruct the child word for the witness
                let mut path = Vec::new();
                let mut cur = mstate;
                while let Some((prev, sym)) = parent[cur] {
                    path.push(sym);
                    cur = prev;
                }
                path.reverse();
                let children = path.iter().map(|p| witnesses[*p].clone()).collect();
                sindex.insert(y.clone(), subsets.len());
                subsets.push(y.clone());
                witnesses.push(UTree {
                    label: base.clone(),
                    children,
                });
            }
            Ok(y)
        };
        let y0 = note_yield(0, &states, &parent, subsets, sindex, witnesses)?;
        yields.push(y0);
        while let Some(m) = queue.pop_front() {
            for p in 0..alpha_len {
                let tuple: Vec<BTreeSet<usize>> = members
                    .iter()
                    .enumerate()
                    .map(|(j, g)| lifted_step(&moves[*g], &states[m][j], &subsets[p]))
                    .collect();
                let next = match index.get(&tuple) {
                    Some(i) => *i,
                    None => {
                        let i = states.len();
                        if i >= caps.max_det_states {
                            return Err(Error::ResourceCap(format!(
                                "saturation exceeded {} horizontal macro states",
                                caps.max_det_states
                            )));
                        }
                        index.insert(tuple.clone(), i);
                        states.push(tuple);
                        parent.push(Some((m, p)));
                        let y = note_yield(i, &states, &parent, subsets, sindex, witnesses)?;
                        yields.push(y);
                        queue.push_back(i);
                        i
                    }
                };
                delta.insert((m, p), next);
            }
        }
        if record {
            Ok(Some(BaseMachine {
                base: base.clone(),
                members,
                initial: 0,
                n_states: states.len(),
                delta,
                yields,
            }))
        } else {
            Ok(None)
        }
    };

    loop {
        let before = subsets.len();
        for base in &all_bases {
            explore(base, &mut subsets, &mut sindex, &mut witnesses, false)?;
        }
        if subsets.len() == before {
            break;
        }
    }
    let mut base_machines = BTreeMap::new();
    for base in &all_bases {
        let bm = explore(base, &mut subsets, &mut sindex, &mut witnesses, true)?
            .expect("recording pass returns the machine");
        base_machines.insert(base.clone(), bm);
    }
    Ok(Saturation {
        origin,
        locals,
        bases,
        subsets,
        witnesses,
        base_machines,
    })
}

impl Saturation {
    pub fn global_of(&self, machine: usize, name: &str) -> Option<usize> {
        (0..self.origin.len())
            .find(|g| self.origin[*g].0 == machine && self.locals[*g] == name)
    }

    /// Some tree derived as `name`, if any.
    pub fn member_tree(&self, global: usize) -> Option<&UTree> {
        self.subsets
            .iter()
            .position(|p| p.contains(&global))
            .map(|i| &self.witnesses[i])
    }

    /// Witness in `L(a) ∖ L(b)`, `None` when included.
    pub fn inclusion_witness(&self, a: usize, b: usize) -> Option<&UTree> {
        self.subsets
            .iter()
            .position(|p| p.contains(&a) && !p.contains(&b))
            .map(|i| &self.witnesses[i])
    }

    pub fn languages_equal(&self, a: usize, b: usize) -> bool {
        self.inclusion_witness(a, b).is_none() && self.inclusion_witness(b, a).is_none()
    }
}

/// Deterministic unranked tree automaton: states are derivable-name sets
/// (plus an implicit empty sink), horizontal languages are pairwise
/// disjoint per (state, base).
#[derive(Clone, Debug)]
pub struct Duta {
    pub names: Vec<Symbol>,
    pub subsets: Vec<BTreeSet<usize>>,
    pub finals: BTreeSet<usize>,
    /// (subset id, base) -> automaton over subset-id symbols "s<i>"
    pub horiz: BTreeMap<(usize, Symbol), Nfa>,
}

pub fn determinize_uta(u: &Nuta, caps: &Caps) -> Result<Duta> {
    let sat = saturate(&[u], caps)?;
    let mut horiz = BTreeMap::new();
    for (base, bm) in &sat.base_machines {
        for (sid, subset) in sat.subsets.iter().enumerate() {
            if &sat.bases[*subset.iter().next().unwrap()] != base {
                continue;
            }
            horiz.insert((sid, base.clone()), yield_machine(bm, subset, &sat, |i| format!("s{i}")));
        }
    }
    let finals = sat
        .subsets
        .iter()
        .enumerate()
        .filter(|(_, p)| p.iter().any(|g| u.finals.contains(&sat.origin[*g].1)))
        .map(|(i, _)| i)
        .collect();
    Ok(Duta {
        names: u.names.clone(),
        subsets: sat.subsets.clone(),
        finals,
        horiz,
    })
}

/// Automaton accepting exactly the subset words whose run yields `subset`.
fn yield_machine(
    bm: &BaseMachine,
    subset: &BTreeSet<usize>,
    sat: &Saturation,
    symbol_of: impl Fn(usize) -> String,
) -> Nfa {
    let finals: BTreeSet<usize> = bm
        .yields
        .iter()
        .enumerate()
        .filter(|(_, y)| *y == subset)
        .map(|(i, _)| i)
        .collect();
    let transitions = bm
        .delta
        .iter()
        .map(|((m, p), t)| (*m, Some(symbol_of(*p)), *t))
        .collect();
    let alphabet = (0..sat.subsets.len()).map(&symbol_of).collect();
    Nfa {
        alphabet,
        labels: (0..bm.n_states).map(|i| format!("h{i}")).collect(),
        initial: bm.initial,
        finals,
        transitions,
    }
}

/// Equivalent grammar whose specializations of each element have pairwise
/// disjoint subtree languages. When several derivable-name sets contain the
/// root, a fresh root name unioning them is added (it occurs in no content
/// model). For the dRE mechanism the horizontal languages must admit
/// deterministic expressions; otherwise the grammar is reported
/// non-representable.
pub fn normalize(g: &Grammar, caps: &Caps) -> Result<Grammar> {
    let u = to_uta(g);
    let sat = saturate(&[&u], caps)?;
    let root_global = sat.global_of(0, &g.root).expect("root is a name");
    // subset names: singletons keep their member's name
    let mut used = BTreeSet::new();
    let mut subset_names = Vec::new();
    for subset in &sat.subsets {
        let base = &sat.bases[*subset.iter().next().unwrap()];
        let mut cand = if subset.len() == 1 {
            sat.locals[*subset.iter().next().unwrap()].clone()
        } else {
            let tags: Vec<String> = subset
                .iter()
                .map(|g| {
                    let n = &sat.locals[*g];
                    n.split_once('#').map(|(_, t)| t.to_string()).unwrap_or_else(|| n.clone())
                })
                .collect();
            format!("{base}#{}", tags.join("."))
        };
        while !used.insert(cand.clone()) {
            cand.push_str(".x");
        }
        subset_names.push(cand);
    }
    let mut rules: Vec<(Symbol, ContentModel)> = Vec::new();
    for (sid, subset) in sat.subsets.iter().enumerate() {
        let base = &sat.bases[*subset.iter().next().unwrap()];
        let bm = &sat.base_machines[base];
        let m = yield_machine(bm, subset, &sat, |i| subset_names[i].clone());
        rules.push((subset_names[sid].clone(), ContentModel::from_machine(m.trim())));
    }
    let accepting: Vec<usize> = sat
        .subsets
        .iter()
        .enumerate()
        .filter(|(_, p)| p.contains(&root_global))
        .map(|(i, _)| i)
        .collect();
    let root = if accepting.len() == 1 {
        subset_names[accepting[0]].clone()
    } else {
        let base = mu(&g.root).to_string();
        let mut cand = format!("{base}#root");
        while !used.insert(cand.clone()) {
            cand.push_str(".x");
        }
        let parts: Vec<Nfa> = accepting
            .iter()
            .map(|sid| {
                let subset = &sat.subsets[*sid];
                let bm = &sat.base_machines[&base];
                yield_machine(bm, subset, &sat, |i| subset_names[i].clone())
            })
            .collect();
        let alphabet = parts.iter().flat_map(|p| p.alphabet.iter().cloned()).collect();
        let union = Nfa::union_many(&parts, alphabet);
        rules.push((cand.clone(), ContentModel::from_machine(union.trim())));
        cand
    };
    // realize the mechanism
    let rules = rules
        .into_iter()
        .map(|(name, model)| {
            let model = match g.mech {
                Mechanism::Nfa => model,
                Mechanism::Dfa => ContentModel::from_machine(
                    minimize(&model.nfa().determinize(caps)?).into_nfa(),
                ),
                Mechanism::Nre => ContentModel::from_ast(nfa_to_regex(model.nfa(), caps)?),
                Mechanism::Dre => match to_dre(model.nfa(), caps)? {
                    Some(ast) => ContentModel::from_ast(ast),
                    None => {
                        return Err(Error::NotRepresentable(format!(
                            "no deterministic expression for the content of `{name}`"
                        )))
                    }
                },
            };
            Ok((name, model))
        })
        .collect::<Result<Vec<_>>>()?;
    reduce(&Grammar::assemble(GrammarClass::Edtd, g.mech, root, rules))
}

/// Language equality. Reduced flat grammars are compared rule by rule; the
/// specialized classes go through joint saturation of their tree automata.
pub fn equivalent_grammar(g1: &Grammar, g2: &Grammar, caps: &Caps) -> Result<bool> {
    Ok(grammar_difference_witness(g1, g2, caps)?.is_none())
}

/// `L(g1) ⊆ L(g2)` as tree languages.
pub fn grammar_included(g1: &Grammar, g2: &Grammar, caps: &Caps) -> Result<bool> {
    let u1 = to_uta(g1);
    let u2 = to_uta(g2);
    let sat = saturate(&[&u1, &u2], caps)?;
    let r1 = sat.global_of(0, &g1.root).expect("root is a name");
    let r2 = sat.global_of(1, &g2.root).expect("root is a name");
    Ok(sat.inclusion_witness(r1, r2).is_none())
}

/// Some tree in the symmetric difference of the two tree languages.
pub fn grammar_difference_witness(
    g1: &Grammar,
    g2: &Grammar,
    caps: &Caps,
) -> Result<Option<UTree>> {
    if g1.class == GrammarClass::Dtd && g2.class == GrammarClass::Dtd {
        if g1.root != g2.root
            || g1.names.iter().collect::<BTreeSet<_>>() != g2.names.iter().collect::<BTreeSet<_>>()
        {
            // fall through to the tree-level search for a witness
        } else {
            let mut same = true;
            for n in &g1.names {
                if !Nfa::equivalent(g1.rules[n].nfa(), g2.rules[n].nfa(), caps)? {
                    same = false;
                    break;
                }
            }
            if same {
                return Ok(None);
            }
        }
    }
    let u1 = to_uta(g1);
    let u2 = to_uta(g2);
    let sat = saturate(&[&u1, &u2], caps)?;
    let r1 = sat.global_of(0, &g1.root).expect("root is a name");
    let r2 = sat.global_of(1, &g2.root).expect("root is a name");
    if let Some(w) = sat.inclusion_witness(r1, r2) {
        return Ok(Some(w.clone()));
    }
    Ok(sat.inclusion_witness(r2, r1).cloned())
}

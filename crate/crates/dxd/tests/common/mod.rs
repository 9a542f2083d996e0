// Shared machinery for the integration suites: parsing shorthands, bounded
// enumeration of words and trees, memoized tree-membership tables, a
// materialization oracle that is independent of the library's grammar
// construction, and seeded generators for the randomized corpora.
#![allow(dead_code)]

use dxd::automata::{ComposeOp, Nfa};
use dxd::document::{KernelDoc, UTree};
use dxd::regex::{parse_regex, to_nfa, RegexAst};
use dxd::schema::{load_schema, Grammar};
use dxd::word_typing::{KernelWord, WordDesign};
use dxd::{mu, Caps, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub fn caps() -> Caps {
    Caps::default()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Language of a regex in the crate's surface syntax.
pub fn lang(re: &str) -> Nfa {
    to_nfa(&parse_regex(re, &caps()).expect("test regex parses"))
}

/// One symbol per character: "abc" -> [a, b, c].
pub fn letters(s: &str) -> Vec<Symbol> {
    s.chars().map(|c| c.to_string()).collect()
}

pub fn grammar(text: &str) -> Grammar {
    load_schema(text, &caps()).expect("test grammar loads")
}

pub fn eq(a: &Nfa, b: &Nfa) -> bool {
    Nfa::equivalent(a, b, &caps()).expect("equivalence within caps")
}

pub fn incl(a: &Nfa, b: &Nfa) -> bool {
    Nfa::includes(a, b, &caps()).expect("inclusion within caps")
}

/// Word design from a target regex and a space-separated kernel word.
pub fn design(target: &str, kernel: &str) -> WordDesign {
    let kernel = dxd::word_typing::parse_kernel_word(kernel).expect("kernel parses");
    let mut target = lang(target);
    for seg in kernel.segments() {
        target.alphabet.extend(seg.iter().cloned());
    }
    WordDesign { target, kernel }
}

/// Every typing in `got` matches exactly one entry of `want` slotwise, and
/// vice versa. Comparison is by language.
pub fn same_typing_set(got: &[Vec<Nfa>], want: &[&[&str]]) {
    assert_eq!(got.len(), want.len(), "typing counts differ");
    let mut used = vec![false; want.len()];
    for t in got {
        let hit = want.iter().position(|w| {
            t.len() == w.len() && t.iter().zip(w.iter()).all(|(a, b)| eq(a, &lang(b)))
        });
        match hit {
            Some(i) if !used[i] => used[i] = true,
            _ => panic!(
                "typing {:?} not among the expected ones (or matched twice)",
                t.len()
            ),
        }
    }
}

/// All words over `alphabet` of length at most `max_len`, shortest first.
pub fn words_up_to(alphabet: &BTreeSet<Symbol>, max_len: usize) -> Vec<Vec<Symbol>> {
    let mut out: Vec<Vec<Symbol>> = vec![vec![]];
    let mut layer: Vec<Vec<Symbol>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for s in alphabet {
                let mut v = w.clone();
                v.push(s.clone());
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

// ------------------------------------------------------- tree enumeration

/// Every ordered labeled tree up to a node budget, interned so that
/// membership tables can be computed bottom-up once per grammar. Ids are in
/// nondecreasing size order, so children always precede parents.
pub struct TreePool {
    labels: Vec<Symbol>,
    kids: Vec<Vec<usize>>,
}

impl TreePool {
    pub fn enumerate(labels: &[&str], max_nodes: usize) -> TreePool {
        let mut pool = TreePool {
            labels: Vec::new(),
            kids: Vec::new(),
        };
        // trees_by_size[s] lists ids of trees with exactly s+1 nodes;
        // forests_by_size[k] lists child-id vectors totalling k nodes.
        let mut trees_by_size: Vec<Vec<usize>> = Vec::new();
        let mut forests_by_size: Vec<Vec<Vec<usize>>> = vec![vec![vec![]]];
        for size in 1..=max_nodes {
            if size >= 2 {
                let k = size - 1;
                let mut forests = Vec::new();
                for first in 1..=k {
                    for &t in &trees_by_size[first - 1] {
                        for rest in &forests_by_size[k - first] {
                            let mut f = vec![t];
                            f.extend(rest.iter().copied());
                            forests.push(f);
                        }
                    }
                }
                forests_by_size.push(forests);
            }
            let mut this_size = Vec::new();
            for forest in &forests_by_size[size - 1] {
                for label in labels {
                    this_size.push(pool.labels.len());
                    pool.labels.push(label.to_string());
                    pool.kids.push(forest.clone());
                }
            }
            trees_by_size.push(this_size);
        }
        pool
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, id: usize) -> &Symbol {
        &self.labels[id]
    }

    pub fn kids(&self, id: usize) -> &[usize] {
        &self.kids[id]
    }

    /// Materialize one pool entry as a real tree.
    pub fn tree(&self, id: usize) -> UTree {
        UTree::node(
            self.labels[id].clone(),
            self.kids[id].iter().map(|&c| self.tree(c)).collect(),
        )
    }

    /// Per-tree sets of derivable grammar names, computed bottom-up. A tree
    /// belongs to the language rooted at name `n` iff its set contains `n`.
    pub fn derivable_table(&self, g: &Grammar) -> Vec<BTreeSet<Symbol>> {
        let mut table: Vec<BTreeSet<Symbol>> = Vec::with_capacity(self.len());
        for id in 0..self.len() {
            let child_sets: Vec<BTreeSet<Symbol>> = self.kids[id]
                .iter()
                .map(|&c| table[c].clone())
                .collect();
            let mut names = BTreeSet::new();
            for name in &g.names {
                if mu(name) == self.labels[id].as_str()
                    && g.rules[name].nfa().accepts_set_word(&child_sets)
                {
                    names.insert(name.clone());
                }
            }
            table.push(names);
        }
        table
    }
}

// -------------------------------------------------- materialization oracle

/// Decides, purely by structural matching, whether a pool tree is a
/// materialization of the kernel under per-function typings: the concrete
/// part must coincide node for node and each docking point must absorb a
/// forest that the corresponding typing accepts.
pub struct MatOracle<'a> {
    pool: &'a TreePool,
    kernel: &'a KernelDoc,
    typings: &'a [Grammar],
    tables: Vec<Vec<BTreeSet<Symbol>>>,
}

impl<'a> MatOracle<'a> {
    pub fn new(pool: &'a TreePool, kernel: &'a KernelDoc, typings: &'a [Grammar]) -> Self {
        let tables = typings.iter().map(|g| pool.derivable_table(g)).collect();
        MatOracle {
            pool,
            kernel,
            typings,
            tables,
        }
    }

    pub fn is_materialization(&self, id: usize) -> bool {
        self.match_node(id, &self.kernel.tree)
    }

    fn match_node(&self, id: usize, k: &UTree) -> bool {
        self.pool.label(id) == &k.label && self.match_forest(self.pool.kids(id), &k.children)
    }

    fn match_forest(&self, ids: &[usize], ks: &[UTree]) -> bool {
        let Some((first, rest)) = ks.split_first() else {
            return ids.is_empty();
        };
        if dxd::is_function_symbol(&first.label) {
            let slot = self
                .kernel
                .functions
                .iter()
                .position(|f| f == &first.label)
                .expect("kernel function is registered");
            (0..=ids.len()).any(|take| {
                self.forest_ok(slot, &ids[..take]) && self.match_forest(&ids[take..], rest)
            })
        } else {
            !ids.is_empty() && self.match_node(ids[0], first) && self.match_forest(&ids[1..], rest)
        }
    }

    pub fn forest_ok(&self, slot: usize, ids: &[usize]) -> bool {
        let g = &self.typings[slot];
        let child_sets: Vec<BTreeSet<Symbol>> = ids
            .iter()
            .map(|&id| self.tables[slot][id].clone())
            .collect();
        g.rules[&g.root].nfa().accepts_set_word(&child_sets)
    }
}

// -------------------------------------------------------------- generators

/// Random regex over the listed symbols, biased toward small shapes and
/// never the empty set.
pub fn random_regex(r: &mut ChaCha8Rng, alphabet: &[&str], budget: usize) -> RegexAst {
    let sym = |r: &mut ChaCha8Rng| {
        let i = r.gen_range(0..alphabet.len());
        RegexAst::Sym(alphabet[i].to_string())
    };
    if budget <= 1 {
        return if r.gen_bool(0.9) {
            sym(r)
        } else {
            RegexAst::Epsilon
        };
    }
    match r.gen_range(0..10) {
        0..=2 => sym(r),
        3..=5 => {
            let left = random_regex(r, alphabet, budget / 2);
            let right = random_regex(r, alphabet, budget - 1 - budget / 2);
            RegexAst::Concat(Box::new(left), Box::new(right))
        }
        6..=7 => {
            let left = random_regex(r, alphabet, budget / 2);
            let right = random_regex(r, alphabet, budget - 1 - budget / 2);
            RegexAst::Alt(Box::new(left), Box::new(right))
        }
        8 => RegexAst::Star(Box::new(random_regex(r, alphabet, budget - 1))),
        _ => {
            let inner = random_regex(r, alphabet, budget - 1);
            if r.gen_bool(0.5) {
                RegexAst::Plus(Box::new(inner))
            } else {
                RegexAst::Opt(Box::new(inner))
            }
        }
    }
}

pub fn random_regex_nfa(r: &mut ChaCha8Rng, alphabet: &[&str], budget: usize) -> Nfa {
    let mut n = to_nfa(&random_regex(r, alphabet, budget));
    n.alphabet
        .extend(alphabet.iter().map(|s| s.to_string()));
    n
}

/// Word design with a random target and a random kernel word over the same
/// letters, one or two docking points.
pub fn random_word_design(r: &mut ChaCha8Rng, alphabet: &[&str]) -> WordDesign {
    let target = random_regex_nfa(r, alphabet, 8);
    let holes = r.gen_range(1..=2);
    let mut segments = Vec::new();
    let mut functions = Vec::new();
    for i in 0..=holes {
        let len = r.gen_range(0..=2);
        let seg: Vec<Symbol> = (0..len)
            .map(|_| alphabet[r.gen_range(0..alphabet.len())].to_string())
            .collect();
        segments.push(seg);
        if i < holes {
            functions.push(format!("@f{}", i + 1));
        }
    }
    let kernel = KernelWord::new(segments, functions).expect("generated kernel is well formed");
    let mut target = target;
    for seg in kernel.segments() {
        target.alphabet.extend(seg.iter().cloned());
    }
    WordDesign { target, kernel }
}

/// Intersection, with the union of both alphabets.
pub fn intersect(a: &Nfa, b: &Nfa) -> Nfa {
    Nfa::compose(ComposeOp::Intersect, a, b, &caps()).expect("intersection within caps")
}

/// Random sample of a word accepted by `a`, if any exists within the length
/// bound: enumerate short members and pick one.
pub fn sample_word(r: &mut ChaCha8Rng, a: &Nfa, max_len: usize) -> Option<Vec<Symbol>> {
    let mut members: Vec<Vec<Symbol>> = words_up_to(&a.alphabet, max_len)
        .into_iter()
        .filter(|w| a.accepts(w))
        .collect();
    if members.is_empty() {
        return a.shortest_word();
    }
    let i = r.gen_range(0..members.len());
    Some(members.swap_remove(i))
}

/// Random flat grammar over the given labels, acyclic by construction: the
/// content of labels[i] only mentions later labels, the last label is a
/// leaf. Root is labels[0].
pub fn random_flat_grammar(r: &mut ChaCha8Rng, labels: &[&str]) -> Grammar {
    use dxd::schema::{ContentModel, GrammarClass, Mechanism};
    let mut rules = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let rest: Vec<&str> = labels[i + 1..].to_vec();
        let model = if rest.is_empty() {
            ContentModel::epsilon()
        } else {
            ContentModel::from_ast(random_regex(r, &rest, 6))
        };
        rules.push((l.to_string(), model));
    }
    Grammar::assemble(GrammarClass::Dtd, Mechanism::Nre, labels[0].to_string(), rules)
}

/// Random tree valid under a grammar, grown top-down from `name` by
/// sampling each content model. Below the depth budget the shortest
/// derivation is forced, so self-nesting names must keep a short way out
/// (the generators here always do).
pub fn sample_tree(r: &mut ChaCha8Rng, g: &Grammar, name: &Symbol, depth: usize) -> UTree {
    let content = g.rules[name].nfa();
    let word = if depth == 0 {
        content.shortest_word().expect("bound name derives something")
    } else {
        sample_word(r, content, 3).expect("bound name derives something")
    };
    let children = word
        .iter()
        .map(|n| sample_tree(r, g, n, depth.saturating_sub(1)))
        .collect();
    UTree::node(mu(name).to_string(), children)
}

/// Two-label grammar for enumeration corpora: `s` spans bushes of `a`s,
/// `a` nests itself but its content is optional, so every branch can stop.
pub fn random_enum_grammar(r: &mut ChaCha8Rng) -> Grammar {
    use dxd::schema::{reduce, ContentModel, GrammarClass, Mechanism};
    let s = random_regex(r, &["a"], 6);
    let a = RegexAst::Opt(Box::new(random_regex(r, &["a"], 4)));
    let g = Grammar::assemble(
        GrammarClass::Dtd,
        Mechanism::Nre,
        "s".into(),
        vec![
            ("s".into(), ContentModel::from_ast(s)),
            ("a".into(), ContentModel::from_ast(a)),
        ],
    );
    reduce(&g).expect("optional self-nesting keeps every name bound")
}

/// Candidate per-function typing: a fresh root with a random content model
/// over the given labels, backed by the target's own rules. None when the
/// draw is not a usable grammar (empty language somewhere).
pub fn random_lifted_typing(
    r: &mut ChaCha8Rng,
    target: &Grammar,
    root: &str,
    labels: &[&str],
) -> Option<Grammar> {
    use dxd::schema::{reduce, ContentModel, GrammarClass, Mechanism};
    let mut rules = vec![(
        root.to_string(),
        ContentModel::from_ast(random_regex(r, labels, 5)),
    )];
    for n in &target.names {
        rules.push((n.clone(), target.rules[n].clone()));
    }
    let g = Grammar::assemble(GrammarClass::Dtd, Mechanism::Nre, root.to_string(), rules);
    reduce(&g).ok()
}

/// Insert `n` docking points as fresh leaves at random positions, then
/// renumber them in document order as @f1.. and parse the kernel.
pub fn inject_functions(r: &mut ChaCha8Rng, tree: &UTree, n: usize) -> KernelDoc {
    fn element_paths(t: &UTree, here: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dxd::is_function_symbol(&t.label) {
            return;
        }
        out.push(here.clone());
        for (i, c) in t.children.iter().enumerate() {
            here.push(i);
            element_paths(c, here, out);
            here.pop();
        }
    }
    fn at_mut<'a>(t: &'a mut UTree, path: &[usize]) -> &'a mut UTree {
        let mut cur = t;
        for &i in path {
            cur = &mut cur.children[i];
        }
        cur
    }
    fn renumber(t: &mut UTree, next: &mut usize) {
        if dxd::is_function_symbol(&t.label) {
            t.label = format!("@f{next}");
            *next += 1;
        }
        for c in &mut t.children {
            renumber(c, next);
        }
    }
    let mut tree = tree.clone();
    for k in 0..n {
        let mut all = Vec::new();
        element_paths(&tree, &mut Vec::new(), &mut all);
        let path = all[r.gen_range(0..all.len())].clone();
        let host = at_mut(&mut tree, &path);
        let at = r.gen_range(0..=host.children.len());
        host.children.insert(at, UTree::leaf(format!("@tmp{k}")));
    }
    let mut next = 1;
    renumber(&mut tree, &mut next);
    dxd::document::kernel_of_tree(tree).expect("generated kernel is well formed")
}

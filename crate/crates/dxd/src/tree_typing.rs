//! Tree-level typing problems. A design couples a tree grammar with a kernel
//! document; a typing assigns one grammar per docking point. Flat and
//! single-type targets reduce to one word problem per kernel node; general
//! specialized targets are normalized first and searched through candidate
//! specialization assignments (one set of names per kernel node), each of
//! which induces per-node box designs.
//!
//! Completeness is always read relative to the kernel shape: a typing is
//! local when its materializations are exactly the valid trees that extend
//! the kernel, not all valid trees outright.

use crate::automata::{BoxLang, ComposeOp, Nfa};
use crate::bottom_up::{build_t_tau, cons, BottomUpDesign};
use crate::document::{derivable_names, validate, KernelDoc, UTree};
use crate::schema::{
    equivalent_grammar, grammar_included, normalize, reduce, saturate, to_uta, ContentModel,
    Grammar, GrammarClass, Mechanism,
};
use crate::word_typing::{
    all_maximal_local_box, check_maximal_local_box, exists_local_box, exists_maximal_local_box,
    exists_perfect_box, BoxDesign, KernelBox,
};
use crate::{function_root_symbol, is_function_symbol, mu, Caps, Error, Result, Symbol};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// The three typing properties a check or search can target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    Local,
    MaximalLocal,
    Perfect,
}

impl Property {
    pub fn parse(s: &str) -> Option<Property> {
        match s {
            "loc" | "local" => Some(Property::Local),
            "ml" | "maximal-local" => Some(Property::MaximalLocal),
            "perf" | "perfect" => Some(Property::Perfect),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Property::Local => "loc",
            Property::MaximalLocal => "ml",
            Property::Perfect => "perf",
        }
    }
}

/// A target grammar together with the kernel document to complete.
#[derive(Clone, Debug)]
pub struct TreeDesign {
    pub target: Grammar,
    pub kernel: KernelDoc,
}

impl TreeDesign {
    /// Reduces the target and rejects inputs the analyses cannot represent:
    /// docking-point symbols inside the grammar, specialization tags on
    /// kernel labels.
    pub fn new(target: Grammar, kernel: KernelDoc) -> Result<TreeDesign> {
        if let Some(bad) = target.names.iter().find(|n| is_function_symbol(n)) {
            return Err(Error::Unsupported(format!(
                "target grammar names the docking point `{bad}`"
            )));
        }
        let mut labels = BTreeSet::new();
        element_labels(&kernel.tree, &mut labels);
        if let Some(bad) = labels.iter().find(|l| l.contains('#')) {
            return Err(Error::Unsupported(format!(
                "kernel label `{bad}` carries a specialization tag"
            )));
        }
        let target = reduce(&target)?;
        Ok(TreeDesign { target, kernel })
    }
}

fn element_labels(t: &UTree, out: &mut BTreeSet<Symbol>) {
    if !is_function_symbol(&t.label) {
        out.insert(t.label.clone());
        for c in &t.children {
            element_labels(c, out);
        }
    }
}

/// Candidate specialization assignment: for every element node of the
/// kernel (by preorder index) the set of same-base names it may assume;
/// docking points map to their own singleton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Kappa {
    pub sets: BTreeMap<usize, BTreeSet<Symbol>>,
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (id, set) in &self.sets {
            if !first {
                write!(f, "; ")?;
            }
            first = false;
            let names: Vec<&str> = set.iter().map(|s| s.as_str()).collect();
            write!(f, "x{id} -> {{{}}}", names.join(", "))?;
        }
        Ok(())
    }
}

/// The word problem induced at one kernel node: the box design plus the
/// node's preorder index and the specialization set that selected its
/// content.
#[derive(Clone, Debug)]
pub struct InducedDesign {
    pub node: usize,
    pub selector: BTreeSet<Symbol>,
    pub design: BoxDesign,
}

// ------------------------------------------------------------- node table

struct Nodes<'a> {
    list: Vec<&'a UTree>,
    parent: Vec<Option<usize>>,
    size: Vec<usize>,
}

fn collect_nodes(tree: &UTree) -> Nodes<'_> {
    fn rec<'a>(t: &'a UTree, parent: Option<usize>, out: &mut Nodes<'a>) -> usize {
        let id = out.list.len();
        out.list.push(t);
        out.parent.push(parent);
        out.size.push(0);
        let mut size = 1;
        for c in &t.children {
            size += rec(c, Some(id), out);
        }
        out.size[id] = size;
        size
    }
    let mut nodes = Nodes {
        list: Vec::new(),
        parent: Vec::new(),
        size: Vec::new(),
    };
    rec(tree, None, &mut nodes);
    nodes
}

impl<'a> Nodes<'a> {
    fn len(&self) -> usize {
        self.list.len()
    }

    fn is_function(&self, id: usize) -> bool {
        is_function_symbol(&self.list[id].label)
    }

    fn label(&self, id: usize) -> &Symbol {
        &self.list[id].label
    }

    fn children(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut j = id + 1;
        while j < id + self.size[id] {
            out.push(j);
            j += self.size[j];
        }
        out
    }

    /// Element nodes with a docking point somewhere below.
    fn docking_paths(&self) -> Vec<bool> {
        (0..self.len())
            .map(|id| {
                !self.is_function(id)
                    && (id..id + self.size[id]).any(|j| self.is_function(j))
            })
            .collect()
    }
}

// ------------------------------------------------------- design assembly

/// Automaton accepting every word over `alphabet`.
fn all_words(alphabet: &BTreeSet<Symbol>) -> Nfa {
    Nfa {
        alphabet: alphabet.clone(),
        labels: vec!["u".into()],
        initial: 0,
        finals: BTreeSet::from([0]),
        transitions: alphabet.iter().map(|s| (0, Some(s.clone()), 0)).collect(),
    }
}

/// Fixed cells with unconstrained gaps at the docking points.
fn shape_nfa(boxes: &[BoxLang], alphabet: &BTreeSet<Symbol>, caps: &Caps) -> Result<Nfa> {
    let gap = all_words(alphabet);
    let mut acc = boxes[0].to_nfa();
    for b in &boxes[1..] {
        acc = Nfa::compose(ComposeOp::Concat, &acc, &gap, caps)?;
        acc = Nfa::compose(ComposeOp::Concat, &acc, &b.to_nfa(), caps)?;
    }
    Ok(acc)
}

/// Union of the content models of the selected names.
fn content_union(g: &Grammar, names: &BTreeSet<Symbol>, alphabet: &BTreeSet<Symbol>) -> Nfa {
    let parts: Vec<Nfa> = names
        .iter()
        .filter_map(|n| g.rules.get(n).map(|m| m.nfa().clone()))
        .collect();
    if parts.is_empty() {
        return Nfa::empty_lang(alphabet.clone());
    }
    let mut alpha = alphabet.clone();
    for p in &parts {
        alpha.extend(p.alphabet.iter().cloned());
    }
    Nfa::union_many(&parts, alpha).trim()
}

/// One child position of a kernel node: a fixed cell or a docking point.
#[derive(Clone, Debug)]
enum ChildPiece {
    Cell(BTreeSet<Symbol>),
    Dock(Symbol),
}

fn boxes_of(pieces: &[ChildPiece]) -> Result<(Vec<BoxLang>, Vec<Symbol>)> {
    let mut boxes = Vec::new();
    let mut run: Vec<BTreeSet<Symbol>> = Vec::new();
    let mut docks = Vec::new();
    for p in pieces {
        match p {
            ChildPiece::Cell(c) => run.push(c.clone()),
            ChildPiece::Dock(f) => {
                boxes.push(BoxLang::new(std::mem::take(&mut run))?);
                docks.push(f.clone());
            }
        }
    }
    boxes.push(BoxLang::new(run)?);
    Ok((boxes, docks))
}

/// Box design for one node: selected content intersected with the kernel
/// shape, over the cells supplied for the element children.
fn assemble_design(
    rules_from: &Grammar,
    node: usize,
    selector: &BTreeSet<Symbol>,
    pieces: &[ChildPiece],
    alphabet: &BTreeSet<Symbol>,
    caps: &Caps,
) -> Result<InducedDesign> {
    let (boxes, docks) = boxes_of(pieces)?;
    let content = content_union(rules_from, selector, alphabet);
    let shape = shape_nfa(&boxes, alphabet, caps)?;
    let target = Nfa::compose(ComposeOp::Intersect, &content, &shape, caps)?.trim();
    Ok(InducedDesign {
        node,
        selector: selector.clone(),
        design: BoxDesign {
            target,
            kernel: KernelBox::new(boxes, docks)?,
        },
    })
}

// ------------------------------------------------------- flat reduction

/// One word design per element node of a flat target: the node's content
/// model intersected with its child string, docking points left open.
pub fn induce_dtd(d: &TreeDesign, caps: &Caps) -> Result<Vec<InducedDesign>> {
    if d.target.class != GrammarClass::Dtd {
        return Err(Error::Unsupported(
            "per-label reduction needs a flat target grammar".into(),
        ));
    }
    let nodes = collect_nodes(&d.kernel.tree);
    let mut alphabet: BTreeSet<Symbol> = d.target.names.iter().cloned().collect();
    for id in 0..nodes.len() {
        if !nodes.is_function(id) {
            alphabet.insert(nodes.label(id).clone());
        }
    }
    let mut designs = Vec::new();
    for id in 0..nodes.len() {
        if nodes.is_function(id) {
            continue;
        }
        let pieces: Vec<ChildPiece> = nodes
            .children(id)
            .into_iter()
            .map(|c| {
                if nodes.is_function(c) {
                    ChildPiece::Dock(nodes.label(c).clone())
                } else {
                    ChildPiece::Cell(BTreeSet::from([nodes.label(c).clone()]))
                }
            })
            .collect();
        let selector = BTreeSet::from([nodes.label(id).clone()]);
        designs.push(assemble_design(&d.target, id, &selector, &pieces, &alphabet, caps)?);
    }
    Ok(designs)
}

/// Paste one grammar per docking point out of word-level slot languages:
/// every target rule is kept and a fresh root gets the slot language as its
/// content. The class tag is recomputed on the reduced result.
fn lift_over(
    rules_from: &Grammar,
    functions: &[Symbol],
    slots: &BTreeMap<Symbol, Nfa>,
) -> Result<Vec<Grammar>> {
    functions
        .iter()
        .map(|f| {
            let root = function_root_symbol(f);
            if rules_from.rules.contains_key(&root) {
                return Err(Error::Unsupported(format!(
                    "target grammar uses the reserved name `{root}`"
                )));
            }
            let slot = slots.get(f).expect("every docking point carries a slot");
            let mut rules: Vec<(Symbol, ContentModel)> = rules_from
                .names
                .iter()
                .map(|n| (n.clone(), rules_from.rules[n].clone()))
                .collect();
            rules.push((root.clone(), ContentModel::from_machine(slot.trim())));
            let mut g = reduce(&Grammar::assemble(
                GrammarClass::Edtd,
                Mechanism::Nfa,
                root,
                rules,
            ))?;
            g.class = actual_class(&g);
            Ok(g)
        })
        .collect()
}

fn actual_class(g: &Grammar) -> GrammarClass {
    if g.names.iter().all(|n| mu(n) == n.as_str()) {
        GrammarClass::Dtd
    } else if g.is_single_type() {
        GrammarClass::Sdtd
    } else {
        GrammarClass::Edtd
    }
}

/// Lift word-level slot languages over the design's own rules; `slots` maps
/// docking points to word languages over the target's name space.
pub fn lift_typing(d: &TreeDesign, slots: &BTreeMap<Symbol, Nfa>) -> Result<Vec<Grammar>> {
    lift_over(&d.target, &d.kernel.functions, slots)
}

// ------------------------------------------------- single-type reduction

/// Witness name per element node, assigned walking down from the root; in a
/// single-type grammar each (parent name, child label) pair admits at most
/// one name, so the assignment is forced. `None` when some node's label has
/// no name in its parent's content.
fn witness_walk(g: &Grammar, nodes: &Nodes<'_>) -> Option<BTreeMap<usize, Symbol>> {
    let mut w = BTreeMap::new();
    if mu(&g.root) != nodes.label(0).as_str() {
        return None;
    }
    w.insert(0, g.root.clone());
    for id in 0..nodes.len() {
        if nodes.is_function(id) {
            continue;
        }
        let Some(name) = w.get(&id).cloned() else { continue };
        let model = &g.rules[&name];
        let symbols = model.symbols();
        for c in nodes.children(id) {
            if nodes.is_function(c) {
                continue;
            }
            let lab = nodes.label(c);
            let found = symbols.iter().find(|s| mu(s) == lab.as_str());
            match found {
                Some(n) => {
                    w.insert(c, n.clone());
                }
                None => return None,
            }
        }
    }
    Some(w)
}

/// One word design per element node of a single-type target, over witness
/// names. `None` when the kernel's shape already escapes the grammar.
pub fn induce_sdtd(d: &TreeDesign, caps: &Caps) -> Result<Option<Vec<InducedDesign>>> {
    if d.target.class != GrammarClass::Sdtd || !d.target.is_single_type() {
        return Err(Error::Unsupported(
            "witness reduction needs a single-type target grammar".into(),
        ));
    }
    let nodes = collect_nodes(&d.kernel.tree);
    let Some(w) = witness_walk(&d.target, &nodes) else {
        return Ok(None);
    };
    let alphabet: BTreeSet<Symbol> = d.target.names.iter().cloned().collect();
    let mut designs = Vec::new();
    for id in 0..nodes.len() {
        if nodes.is_function(id) {
            continue;
        }
        let pieces: Vec<ChildPiece> = nodes
            .children(id)
            .into_iter()
            .map(|c| {
                if nodes.is_function(c) {
                    ChildPiece::Dock(nodes.label(c).clone())
                } else {
                    ChildPiece::Cell(BTreeSet::from([w[&c].clone()]))
                }
            })
            .collect();
        let selector = BTreeSet::from([w[&id].clone()]);
        designs.push(assemble_design(&d.target, id, &selector, &pieces, &alphabet, caps)?);
    }
    Ok(Some(designs))
}

// --------------------------------------------------- relative equivalence

/// Grammar of all trees that extend the kernel: docking points may grow any
/// forest over the given base symbols.
pub fn extension_grammar(
    kernel: &KernelDoc,
    bases: &BTreeSet<Symbol>,
    caps: &Caps,
) -> Result<Grammar> {
    let mut root: Symbol = "s_any".into();
    while bases.contains(&root) {
        root.push('_');
    }
    let any = || ContentModel::from_machine(all_words(bases));
    let mut rules: Vec<(Symbol, ContentModel)> = vec![(root.clone(), any())];
    for b in bases {
        rules.push((b.clone(), any()));
    }
    let universal = Grammar::assemble(GrammarClass::Edtd, Mechanism::Nfa, root, rules);
    let typing = vec![universal; kernel.arity()];
    build_t_tau(kernel, &typing, caps)
}

/// `L(a) = L(b) ∩ L(rel)`, decided on one joint saturation of the three
/// tree automata.
pub fn relative_equal(a: &Grammar, b: &Grammar, rel: &Grammar, caps: &Caps) -> Result<bool> {
    let (ua, ub, ur) = (to_uta(a), to_uta(b), to_uta(rel));
    let sat = saturate(&[&ua, &ub, &ur], caps)?;
    let ra = sat.global_of(0, &a.root).expect("root is a name");
    let rb = sat.global_of(1, &b.root).expect("root is a name");
    let rr = sat.global_of(2, &rel.root).expect("root is a name");
    Ok(sat
        .subsets
        .iter()
        .all(|s| s.contains(&ra) == (s.contains(&rb) && s.contains(&rr))))
}

fn design_bases(d: &TreeDesign) -> BTreeSet<Symbol> {
    let mut bases = d.target.alphabet();
    element_labels(&d.kernel.tree, &mut bases);
    bases
}

/// Locality of a typing, any class: the materializations must be exactly
/// the target trees that extend the kernel.
fn tree_local(d: &TreeDesign, typing: &[Grammar], caps: &Caps) -> Result<bool> {
    if typing.len() != d.kernel.arity() {
        return Err(Error::Arity {
            expected: d.kernel.arity(),
            got: typing.len(),
        });
    }
    let t_tau = build_t_tau(&d.kernel, typing, caps)?;
    let ext = extension_grammar(&d.kernel, &design_bases(d), caps)?;
    relative_equal(&t_tau, &d.target, &ext, caps)
}

// ------------------------------------------------- flat/single-type paths

fn induce_for_class(d: &TreeDesign, caps: &Caps) -> Result<Option<Vec<InducedDesign>>> {
    match d.target.class {
        GrammarClass::Dtd => Ok(Some(induce_dtd(d, caps)?)),
        GrammarClass::Sdtd => induce_sdtd(d, caps),
        GrammarClass::Edtd => Err(Error::Unsupported(
            "specialized targets go through the normalized search".into(),
        )),
    }
}

fn dtd_sdtd_exists(
    d: &TreeDesign,
    prop: Property,
    caps: &Caps,
) -> Result<Option<Vec<Grammar>>> {
    let Some(designs) = induce_for_class(d, caps)? else {
        return Ok(None);
    };
    let mut slots: BTreeMap<Symbol, Nfa> = BTreeMap::new();
    for ind in &designs {
        let found = match prop {
            Property::Local => exists_local_box(&ind.design, caps)?,
            Property::MaximalLocal => exists_maximal_local_box(&ind.design, caps)?,
            Property::Perfect => exists_perfect_box(&ind.design, caps)?,
        };
        let Some(typing) = found else {
            return Ok(None);
        };
        for (f, lang) in ind.design.kernel.functions().iter().zip(typing) {
            slots.insert(f.clone(), lang);
        }
    }
    Ok(Some(lift_typing(d, &slots)?))
}

/// Every maximal local typing of a flat or single-type design: node
/// problems are independent, so the tree-level answers are exactly the
/// products of the per-node answers.
fn dtd_sdtd_all_ml(d: &TreeDesign, caps: &Caps) -> Result<Vec<Vec<Grammar>>> {
    let Some(designs) = induce_for_class(d, caps)? else {
        return Ok(Vec::new());
    };
    let mut per_design: Vec<(Vec<Symbol>, Vec<Vec<Nfa>>)> = Vec::new();
    for ind in &designs {
        let mls = all_maximal_local_box(&ind.design, caps)?;
        if mls.is_empty() && ind.design.kernel.n() > 0 {
            return Ok(Vec::new());
        }
        if ind.design.kernel.n() == 0 {
            // no docking points: the node only gates feasibility
            if exists_local_box(&ind.design, caps)?.is_none() {
                return Ok(Vec::new());
            }
            continue;
        }
        per_design.push((ind.design.kernel.functions().to_vec(), mls));
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_design.len()];
    loop {
        let mut slots: BTreeMap<Symbol, Nfa> = BTreeMap::new();
        for (k, (fns, mls)) in per_design.iter().enumerate() {
            for (f, lang) in fns.iter().zip(&mls[idx[k]]) {
                slots.insert(f.clone(), lang.clone());
            }
        }
        out.push(lift_typing(d, &slots)?);
        // odometer, last design fastest
        let mut k = per_design.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_design[k].1.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Slot languages of a typing as the root content of each grammar, in
/// docking-point order of the given kernel box design.
fn typing_slots(typing: &[Grammar], order: &[Symbol], kernel_fns: &[Symbol]) -> Vec<Nfa> {
    order
        .iter()
        .map(|f| {
            let i = kernel_fns.iter().position(|g| g == f).expect("docking point of the kernel");
            typing[i].rules[&typing[i].root].nfa().clone()
        })
        .collect()
}

fn dtd_sdtd_check(
    d: &TreeDesign,
    typing: &[Grammar],
    prop: Property,
    caps: &Caps,
) -> Result<bool> {
    if typing.len() != d.kernel.arity() {
        return Err(Error::Arity {
            expected: d.kernel.arity(),
            got: typing.len(),
        });
    }
    let bud = BottomUpDesign {
        kernel: d.kernel.clone(),
        typing: typing.to_vec(),
        class: d.target.class,
        mech: d.target.mech,
    };
    if !cons(&bud, caps)? {
        return Err(Error::Inconsistent(
            "the typing's materializations are not definable in the design's class".into(),
        ));
    }
    match prop {
        Property::Local => tree_local(d, typing, caps),
        Property::Perfect => {
            let Some(found) = dtd_sdtd_exists(d, Property::Perfect, caps)? else {
                return Ok(false);
            };
            for (t, f) in typing.iter().zip(&found) {
                if !equivalent_grammar(t, f, caps)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Property::MaximalLocal => {
            if !tree_local(d, typing, caps)? {
                return Ok(false);
            }
            // A typing that is smaller than the lift of its own slot
            // languages is extendable to that lift, hence not maximal.
            let mut slots: BTreeMap<Symbol, Nfa> = BTreeMap::new();
            for (f, t) in d.kernel.functions.iter().zip(typing) {
                slots.insert(f.clone(), t.rules[&t.root].nfa().clone());
            }
            let lifted = lift_typing(d, &slots)?;
            for (t, l) in typing.iter().zip(&lifted) {
                if !equivalent_grammar(t, l, caps)? {
                    return Ok(false);
                }
            }
            let Some(designs) = induce_for_class(d, caps)? else {
                return Ok(false);
            };
            for ind in &designs {
                if ind.design.kernel.n() == 0 {
                    continue;
                }
                let v = typing_slots(typing, ind.design.kernel.functions(), &d.kernel.functions);
                if !check_maximal_local_box(&ind.design, &v, caps)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

// --------------------------------------------------- normalized search

struct EdtdCtx<'a> {
    norm: Grammar,
    names: BTreeSet<Symbol>,
    by_base: BTreeMap<Symbol, BTreeSet<Symbol>>,
    nodes: Nodes<'a>,
    on_path: Vec<bool>,
}

fn edtd_prepare<'a>(d: &'a TreeDesign, caps: &Caps) -> Result<EdtdCtx<'a>> {
    let norm = normalize(&d.target, caps)?;
    let names: BTreeSet<Symbol> = norm.names.iter().cloned().collect();
    let mut by_base: BTreeMap<Symbol, BTreeSet<Symbol>> = BTreeMap::new();
    for n in &names {
        by_base.entry(mu(n).to_string()).or_default().insert(n.clone());
    }
    let nodes = collect_nodes(&d.kernel.tree);
    let on_path = nodes.docking_paths();
    Ok(EdtdCtx {
        norm,
        names,
        by_base,
        nodes,
        on_path,
    })
}

/// Nodes whose specialization set must be guessed, with their candidate
/// pools, in document order. `None` when some pool is empty (the design
/// admits no typing at all); the root is pinned to the normalized root.
fn kappa_domain(ctx: &EdtdCtx<'_>) -> Result<Option<Vec<(usize, Vec<BTreeSet<Symbol>>)>>> {
    if mu(&ctx.norm.root) != ctx.nodes.label(0).as_str() {
        return Ok(None);
    }
    let mut dom = Vec::new();
    for id in 1..ctx.nodes.len() {
        if ctx.nodes.is_function(id) {
            continue;
        }
        let parent_on_path = ctx.nodes.parent[id].map(|p| ctx.on_path[p]).unwrap_or(false);
        let pool: BTreeSet<Symbol> = if ctx.on_path[id] {
            ctx.by_base
                .get(ctx.nodes.label(id))
                .cloned()
                .unwrap_or_default()
        } else if parent_on_path {
            derivable_names(ctx.nodes.list[id], &ctx.norm)
        } else {
            continue;
        };
        if pool.is_empty() {
            return Ok(None);
        }
        dom.push((id, ordered_subsets(&pool)));
    }
    Ok(Some(dom))
}

/// Nonempty subsets by increasing cardinality, then lexicographically.
fn ordered_subsets(pool: &BTreeSet<Symbol>) -> Vec<BTreeSet<Symbol>> {
    let v: Vec<Symbol> = pool.iter().cloned().collect();
    let mut subs: Vec<BTreeSet<Symbol>> = (1u64..(1u64 << v.len()))
        .map(|m| {
            v.iter()
                .enumerate()
                .filter(|(i, _)| m & (1 << i) != 0)
                .map(|(_, s)| s.clone())
                .collect()
        })
        .collect();
    subs.sort_by_key(|s| (s.len(), s.iter().cloned().collect::<Vec<_>>()));
    subs
}

fn kappa_budget(dom: &[(usize, Vec<BTreeSet<Symbol>>)], caps: &Caps) -> Result<()> {
    let mut count: u64 = 1;
    for (_, subs) in dom {
        count = count
            .checked_mul(subs.len() as u64)
            .filter(|c| *c <= caps.max_kappa)
            .ok_or_else(|| {
                Error::ResourceCap(format!(
                    "specialization assignments exceed the cap of {}",
                    caps.max_kappa
                ))
            })?;
    }
    Ok(())
}

/// Per-node box designs induced by one assignment. Only nodes on docking
/// paths carry designs; concrete children enter as fixed cells.
fn designs_for_kappa(
    d: &TreeDesign,
    ctx: &EdtdCtx<'_>,
    kappa: &BTreeMap<usize, BTreeSet<Symbol>>,
    caps: &Caps,
) -> Result<Vec<InducedDesign>> {
    let mut designs = Vec::new();
    for id in 0..ctx.nodes.len() {
        if ctx.nodes.is_function(id) || !ctx.on_path[id] {
            continue;
        }
        let selector = kappa.get(&id).expect("assignment covers docking paths");
        let pieces: Vec<ChildPiece> = ctx
            .nodes
            .children(id)
            .into_iter()
            .map(|c| {
                if ctx.nodes.is_function(c) {
                    ChildPiece::Dock(ctx.nodes.label(c).clone())
                } else {
                    ChildPiece::Cell(kappa[&c].clone())
                }
            })
            .collect();
        designs.push(assemble_design(&ctx.norm, id, selector, &pieces, &ctx.names, caps)?);
    }
    let _ = d;
    Ok(designs)
}

/// Walk every assignment in order; the visitor returns `Some` to stop.
fn for_each_kappa<R>(
    ctx: &EdtdCtx<'_>,
    dom: &[(usize, Vec<BTreeSet<Symbol>>)],
    mut visit: impl FnMut(&BTreeMap<usize, BTreeSet<Symbol>>) -> Result<Option<R>>,
) -> Result<Option<R>> {
    let mut idx = vec![0usize; dom.len()];
    loop {
        let mut kappa: BTreeMap<usize, BTreeSet<Symbol>> = BTreeMap::new();
        kappa.insert(0, BTreeSet::from([ctx.norm.root.clone()]));
        for (k, (id, subs)) in dom.iter().enumerate() {
            kappa.insert(*id, subs[idx[k]].clone());
        }
        if let Some(r) = visit(&kappa)? {
            return Ok(Some(r));
        }
        // odometer, later nodes vary fastest
        let mut k = dom.len();
        loop {
            if k == 0 {
                return Ok(None);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < dom[k].1.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn edtd_lift(ctx: &EdtdCtx<'_>, d: &TreeDesign, slots: &BTreeMap<Symbol, Nfa>) -> Result<Vec<Grammar>> {
    lift_over(&ctx.norm, &d.kernel.functions, slots)
}

/// Locality of a typing against a specialized target; same relative
/// equivalence as for the other classes, with no consistency precondition.
pub fn edtd_loc(d: &TreeDesign, typing: &[Grammar], caps: &Caps) -> Result<bool> {
    tree_local(d, typing, caps)
}

fn edtd_exists_simple(
    d: &TreeDesign,
    prop: Property,
    caps: &Caps,
) -> Result<Option<Vec<Grammar>>> {
    if d.kernel.arity() == 0 {
        return Ok(if validate(&d.kernel.tree, &d.target) {
            Some(Vec::new())
        } else {
            None
        });
    }
    let ctx = edtd_prepare(d, caps)?;
    let Some(dom) = kappa_domain(&ctx)? else {
        return Ok(None);
    };
    kappa_budget(&dom, caps)?;
    for_each_kappa(&ctx, &dom, |kappa| {
        let designs = designs_for_kappa(d, &ctx, kappa, caps)?;
        let mut slots: BTreeMap<Symbol, Nfa> = BTreeMap::new();
        for ind in &designs {
            let found = match prop {
                Property::Local => exists_local_box(&ind.design, caps)?,
                Property::MaximalLocal => exists_maximal_local_box(&ind.design, caps)?,
                Property::Perfect => exists_perfect_box(&ind.design, caps)?,
            };
            let Some(typing) = found else {
                return Ok(None);
            };
            for (f, lang) in ind.design.kernel.functions().iter().zip(typing) {
                slots.insert(f.clone(), lang);
            }
        }
        // an assignment smaller than what the kernel can realize passes
        // every per-node test yet misses materializations; only globally
        // exact assemblies count
        let typing = edtd_lift(&ctx, d, &slots)?;
        if tree_local(d, &typing, caps)? {
            Ok(Some(typing))
        } else {
            Ok(None)
        }
    })
}

/// First assignment whose induced box problems all admit a local typing.
pub fn edtd_exists_local(d: &TreeDesign, caps: &Caps) -> Result<Option<Vec<Grammar>>> {
    edtd_exists_simple(d, Property::Local, caps)
}

/// Candidate maximal typings: per assignment, the product of the per-node
/// maximal box typings. The visitor sees raw slot vectors before any
/// cross-assignment comparison.
fn edtd_ml_candidates<R>(
    d: &TreeDesign,
    caps: &Caps,
    mut visit: impl FnMut(&BTreeMap<Symbol, Nfa>) -> Result<Option<R>>,
) -> Result<Option<R>> {
    let ctx = edtd_prepare(d, caps)?;
    let Some(dom) = kappa_domain(&ctx)? else {
        return Ok(None);
    };
    kappa_budget(&dom, caps)?;
    let mut seen: u64 = 0;
    for_each_kappa(&ctx, &dom, |kappa| {
        let designs = designs_for_kappa(d, &ctx, kappa, caps)?;
        let mut per_design: Vec<(Vec<Symbol>, Vec<Vec<Nfa>>)> = Vec::new();
        let mut dead = false;
        for ind in &designs {
            if ind.design.kernel.n() == 0 {
                if exists_local_box(&ind.design, caps)?.is_none() {
                    dead = true;
                    break;
                }
                continue;
            }
            let mls = all_maximal_local_box(&ind.design, caps)?;
            if mls.is_empty() {
                dead = true;
                break;
            }
            per_design.push((ind.design.kernel.functions().to_vec(), mls));
        }
        if dead {
            return Ok(None);
        }
        let mut idx = vec![0usize; per_design.len()];
        loop {
            seen += 1;
            if seen > caps.max_kappa {
                return Err(Error::ResourceCap(format!(
                    "maximal-typing candidates exceed the cap of {}",
                    caps.max_kappa
                )));
            }
            let mut slots: BTreeMap<Symbol, Nfa> = BTreeMap::new();
            for (k, (fns, mls)) in per_design.iter().enumerate() {
                for (f, lang) in fns.iter().zip(&mls[idx[k]]) {
                    slots.insert(f.clone(), lang.clone());
                }
            }
            if let Some(r) = visit(&slots)? {
                return Ok(Some(r));
            }
            let mut k = per_design.len();
            loop {
                if k == 0 {
                    return Ok(None);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_design[k].1.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    })
}

fn slots_le(a: &BTreeMap<Symbol, Nfa>, b: &BTreeMap<Symbol, Nfa>, caps: &Caps) -> Result<bool> {
    for (f, la) in a {
        if !Nfa::includes(la, &b[f], caps)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every maximal local typing of a specialized design, across all
/// assignments, with dominated and duplicate candidates removed.
pub fn edtd_all_maximal(d: &TreeDesign, caps: &Caps) -> Result<Vec<Vec<Grammar>>> {
    if d.kernel.arity() == 0 {
        return Ok(if validate(&d.kernel.tree, &d.target) {
            vec![Vec::new()]
        } else {
            Vec::new()
        });
    }
    let ctx = edtd_prepare(d, caps)?;
    // candidates are always sound, but an assignment can under-cover what
    // the kernel realizes; only locally exact assemblies are returned,
    // while the full stream still participates in dominance pruning
    let mut cands: Vec<(BTreeMap<Symbol, Nfa>, Option<Vec<Grammar>>)> = Vec::new();
    edtd_ml_candidates(d, caps, |slots| {
        let typing = edtd_lift(&ctx, d, slots)?;
        let local = tree_local(d, &typing, caps)?;
        cands.push((slots.clone(), local.then_some(typing)));
        Ok(None::<()>)
    })?;
    let mut keep: Vec<Vec<Grammar>> = Vec::new();
    'next: for (i, (c, typing)) in cands.iter().enumerate() {
        let Some(typing) = typing else {
            continue;
        };
        for (j, (other, other_typing)) in cands.iter().enumerate() {
            if i == j {
                continue;
            }
            let le = slots_le(c, other, caps)?;
            let ge = slots_le(other, c, caps)?;
            if le && !ge {
                continue 'next; // strictly dominated
            }
            if le && ge && other_typing.is_some() && j < i {
                continue 'next; // duplicate language, keep the first
            }
        }
        keep.push(typing.clone());
    }
    Ok(keep)
}

/// First undominated candidate for deterministic-expression targets, first
/// per-node success otherwise.
pub fn edtd_exists_ml(d: &TreeDesign, caps: &Caps) -> Result<Option<Vec<Grammar>>> {
    match d.target.mech {
        Mechanism::Dre => Ok(edtd_all_maximal(d, caps)?.into_iter().next()),
        _ => edtd_exists_simple(d, Property::MaximalLocal, caps),
    }
}

/// Deterministic top-down assignment for the perfection search: each child
/// position keeps exactly the names that some valid completion can place
/// there; an empty position means no typing exists.
pub fn edtd_exists_perfect(d: &TreeDesign, caps: &Caps) -> Result<Option<Vec<Grammar>>> {
    if d.kernel.arity() == 0 {
        return Ok(if validate(&d.kernel.tree, &d.target) {
            Some(Vec::new())
        } else {
            None
        });
    }
    let ctx = edtd_prepare(d, caps)?;
    if mu(&ctx.norm.root) != ctx.nodes.label(0).as_str() {
        return Ok(None);
    }
    let mut kappa: BTreeMap<usize, BTreeSet<Symbol>> = BTreeMap::new();
    kappa.insert(0, BTreeSet::from([ctx.norm.root.clone()]));
    let mut slots: BTreeMap<Symbol, Nfa> = BTreeMap::new();
    for id in 0..ctx.nodes.len() {
        if ctx.nodes.is_function(id) || !ctx.on_path[id] {
            continue;
        }
        let selector = kappa[&id].clone();
        let children = ctx.nodes.children(id);
        let mut pieces: Vec<ChildPiece> = Vec::new();
        for c in &children {
            if ctx.nodes.is_function(*c) {
                pieces.push(ChildPiece::Dock(ctx.nodes.label(*c).clone()));
            } else {
                let pool = if ctx.on_path[*c] {
                    ctx.by_base
                        .get(ctx.nodes.label(*c))
                        .cloned()
                        .unwrap_or_default()
                } else {
                    derivable_names(ctx.nodes.list[*c], &ctx.norm)
                };
                if pool.is_empty() {
                    return Ok(None);
                }
                pieces.push(ChildPiece::Cell(pool));
            }
        }
        let content = content_union(&ctx.norm, &selector, &ctx.names);
        let (boxes, _) = boxes_of(&pieces)?;
        let shape = shape_nfa(&boxes, &ctx.names, caps)?;
        let feasible = Nfa::compose(ComposeOp::Intersect, &content, &shape, caps)?.trim();
        // narrow every element-child cell to the names the feasible
        // language can actually place there
        let cell_children: Vec<usize> = children
            .iter()
            .copied()
            .filter(|c| !ctx.nodes.is_function(*c))
            .collect();
        for (k, c) in cell_children.iter().enumerate() {
            let at = cell_piece_index(&pieces, k);
            let ChildPiece::Cell(pool) = pieces[at].clone() else {
                unreachable!("cell positions index cells");
            };
            let mut narrowed = BTreeSet::new();
            for name in &pool {
                let mut pinned = pieces.clone();
                pinned[at] = ChildPiece::Cell(BTreeSet::from([name.clone()]));
                let (pb, _) = boxes_of(&pinned)?;
                let ps = shape_nfa(&pb, &ctx.names, caps)?;
                let hit = Nfa::compose(ComposeOp::Intersect, &feasible, &ps, caps)?;
                if !hit.is_empty_lang() {
                    narrowed.insert(name.clone());
                }
            }
            if narrowed.is_empty() {
                return Ok(None);
            }
            pieces[at] = ChildPiece::Cell(narrowed.clone());
            if ctx.on_path[*c] {
                kappa.insert(*c, narrowed);
            }
        }
        let ind = assemble_design(&ctx.norm, id, &selector, &pieces, &ctx.names, caps)?;
        let Some(typing) = exists_perfect_box(&ind.design, caps)? else {
            return Ok(None);
        };
        for (f, lang) in ind.design.kernel.functions().iter().zip(typing) {
            slots.insert(f.clone(), lang);
        }
    }
    Ok(Some(edtd_lift(&ctx, d, &slots)?))
}

/// Piece index of the `k`-th cell.
fn cell_piece_index(pieces: &[ChildPiece], k: usize) -> usize {
    pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p, ChildPiece::Cell(_)))
        .nth(k)
        .expect("cell index in range")
        .0
}

/// Slotwise comparison against the perfection search's own answer.
pub fn edtd_check_perfect(d: &TreeDesign, typing: &[Grammar], caps: &Caps) -> Result<bool> {
    if typing.len() != d.kernel.arity() {
        return Err(Error::Arity {
            expected: d.kernel.arity(),
            got: typing.len(),
        });
    }
    let Some(found) = edtd_exists_perfect(d, caps)? else {
        return Ok(false);
    };
    for (t, f) in typing.iter().zip(&found) {
        if !equivalent_grammar(t, f, caps)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn typing_lt(a: &[Grammar], b: &[Grammar], caps: &Caps) -> Result<bool> {
    let mut strict = false;
    for (ga, gb) in a.iter().zip(b) {
        if !grammar_included(ga, gb, caps)? {
            return Ok(false);
        }
        if !grammar_included(gb, ga, caps)? {
            strict = true;
        }
    }
    Ok(strict)
}

/// Local, and no candidate from any assignment lies strictly above it.
pub fn edtd_check_ml(d: &TreeDesign, typing: &[Grammar], caps: &Caps) -> Result<bool> {
    if !edtd_loc(d, typing, caps)? {
        return Ok(false);
    }
    if d.kernel.arity() == 0 {
        return Ok(true);
    }
    let ctx = edtd_prepare(d, caps)?;
    let dominated = edtd_ml_candidates(d, caps, |slots| {
        let cand = edtd_lift(&ctx, d, slots)?;
        if typing_lt(typing, &cand, caps)? {
            Ok(Some(()))
        } else {
            Ok(None)
        }
    })?;
    Ok(dominated.is_none())
}

/// Specialization sets a typing actually uses, one per element node: a
/// name belongs to the set when some tree grown at that node realizes it
/// and, within the extensions the kernel allows there, its whole language
/// is grown. Docking points map to their own singleton.
pub fn induced_kappa(d: &TreeDesign, typing: &[Grammar], caps: &Caps) -> Result<Kappa> {
    if typing.len() != d.kernel.arity() {
        return Err(Error::Arity {
            expected: d.kernel.arity(),
            got: typing.len(),
        });
    }
    let t_tau = build_t_tau(&d.kernel, typing, caps)?;
    let ext = extension_grammar(&d.kernel, &design_bases(d), caps)?;
    let norm = normalize(&d.target, caps)?;
    let nodes = collect_nodes(&d.kernel.tree);
    let mut sets: BTreeMap<usize, BTreeSet<Symbol>> = BTreeMap::new();
    for id in 0..nodes.len() {
        if nodes.is_function(id) {
            sets.insert(id, BTreeSet::from([nodes.label(id).clone()]));
            continue;
        }
        let node_name = format!("{}#n{}", nodes.label(id), id);
        let grown = reroot(&t_tau, &node_name)?;
        let scope = reroot(&ext, &node_name)?;
        let mut friends = BTreeSet::new();
        for cand in norm.names.iter().filter(|n| mu(n) == nodes.label(id).as_str()) {
            let lang = reroot(&norm, cand)?;
            if scoped_friend(&lang, &scope, &grown, caps)? {
                friends.insert(cand.clone());
            }
        }
        sets.insert(id, friends);
    }
    Ok(Kappa { sets })
}

/// `L(a) ∩ L(scope)` is nonempty and contained in `L(grown)`.
fn scoped_friend(a: &Grammar, scope: &Grammar, grown: &Grammar, caps: &Caps) -> Result<bool> {
    let (ua, us, ug) = (to_uta(a), to_uta(scope), to_uta(grown));
    let sat = saturate(&[&ua, &us, &ug], caps)?;
    let ra = sat.global_of(0, &a.root).expect("root is a name");
    let rs = sat.global_of(1, &scope.root).expect("root is a name");
    let rg = sat.global_of(2, &grown.root).expect("root is a name");
    let mut occupied = false;
    for s in &sat.subsets {
        if s.contains(&ra) && s.contains(&rs) {
            if !s.contains(&rg) {
                return Ok(false);
            }
            occupied = true;
        }
    }
    Ok(occupied)
}

fn reroot(g: &Grammar, name: &Symbol) -> Result<Grammar> {
    if !g.rules.contains_key(name) {
        return Err(Error::Unsupported(format!("grammar has no name `{name}`")));
    }
    let mut r = g.clone();
    r.root = name.clone();
    r.class = GrammarClass::Edtd;
    reduce(&r)
}

// ------------------------------------------------------------ dispatchers

/// Decide one property of a given typing, routed by the target's class.
/// Flat and single-type designs refuse inconsistent typings with a distinct
/// error instead of answering.
pub fn check_tree(d: &TreeDesign, typing: &[Grammar], prop: Property, caps: &Caps) -> Result<bool> {
    match d.target.class {
        GrammarClass::Dtd | GrammarClass::Sdtd => {
            if d.target.class == GrammarClass::Sdtd && induce_sdtd(d, caps)?.is_none() {
                return Err(Error::Inconsistent(
                    "the kernel's shape is rejected by the target grammar".into(),
                ));
            }
            dtd_sdtd_check(d, typing, prop, caps)
        }
        GrammarClass::Edtd => match prop {
            Property::Local => {
                if typing.len() != d.kernel.arity() {
                    return Err(Error::Arity {
                        expected: d.kernel.arity(),
                        got: typing.len(),
                    });
                }
                edtd_loc(d, typing, caps)
            }
            Property::MaximalLocal => {
                if typing.len() != d.kernel.arity() {
                    return Err(Error::Arity {
                        expected: d.kernel.arity(),
                        got: typing.len(),
                    });
                }
                edtd_check_ml(d, typing, caps)
            }
            Property::Perfect => edtd_check_perfect(d, typing, caps),
        },
    }
}

/// Search for a typing with the property, routed by the target's class.
pub fn exists_tree(d: &TreeDesign, prop: Property, caps: &Caps) -> Result<Option<Vec<Grammar>>> {
    match d.target.class {
        GrammarClass::Dtd | GrammarClass::Sdtd => dtd_sdtd_exists(d, prop, caps),
        GrammarClass::Edtd => match prop {
            Property::Local => edtd_exists_local(d, caps),
            Property::MaximalLocal => edtd_exists_ml(d, caps),
            Property::Perfect => edtd_exists_perfect(d, caps),
        },
    }
}

/// Every maximal local typing, routed by the target's class.
pub fn all_maximal_tree(d: &TreeDesign, caps: &Caps) -> Result<Vec<Vec<Grammar>>> {
    match d.target.class {
        GrammarClass::Dtd | GrammarClass::Sdtd => dtd_sdtd_all_ml(d, caps),
        GrammarClass::Edtd => edtd_all_maximal(d, caps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::parse_kernel;
    use crate::schema::load_schema;

    fn caps() -> Caps {
        Caps::default()
    }

    fn design(schema: &str, kernel: &str) -> TreeDesign {
        TreeDesign::new(
            load_schema(schema, &caps()).unwrap(),
            parse_kernel(kernel).unwrap(),
        )
        .unwrap()
    }

    fn grammar(text: &str) -> Grammar {
        load_schema(text, &caps()).unwrap()
    }

    #[test]
    fn flat_reduction_designs_every_element_node() {
        let d = design(
            "class: dtd\nmechanism: nre\nroot: s\ns -> a*, b, c*\n",
            "s(a, b, @f2)",
        );
        let designs = induce_dtd(&d, &caps()).unwrap();
        assert_eq!(designs.len(), 3);
        assert_eq!(designs[0].node, 0);
        assert_eq!(designs[0].selector, BTreeSet::from(["s".to_string()]));
        // the root target is the content narrowed to the kernel's shape
        let abc = Nfa::compose(
            ComposeOp::Concat,
            &Nfa::word_lang(&["a".into(), "b".into()], BTreeSet::new()),
            &{
                let mut c = BTreeSet::new();
                c.insert("c".to_string());
                all_words(&c)
            },
            &caps(),
        )
        .unwrap();
        assert!(Nfa::equivalent(&designs[0].design.target, &abc, &caps()).unwrap());
        // child nodes carry hole-free designs that only gate validity
        assert_eq!(designs[1].design.kernel.n(), 0);
        assert!(exists_local_box(&designs[1].design, &caps()).unwrap().is_some());

        let perfect = exists_tree(&d, Property::Perfect, &caps()).unwrap().unwrap();
        assert_eq!(perfect.len(), 1);
        let want = grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> c*\n");
        assert!(equivalent_grammar(&perfect[0], &want, &caps()).unwrap());

        // a fixed part that cannot sit inside the content kills the search
        let bad = design(
            "class: dtd\nmechanism: nre\nroot: s\ns -> a*, b, c*\n",
            "s(b, b, @f2)",
        );
        assert!(exists_tree(&bad, Property::Local, &caps()).unwrap().is_none());
    }

    #[test]
    fn perfect_typing_round_trips_through_check() {
        let d = design(
            "class: dtd\nmechanism: nre\nroot: s\ns -> a*, b, c*\n",
            "s(@f1, b, @f2)",
        );
        let perfect = exists_tree(&d, Property::Perfect, &caps()).unwrap().unwrap();
        let s1 = grammar("class: dtd\nmechanism: nre\nroot: s_f1\ns_f1 -> a*\n");
        let s2 = grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> c*\n");
        assert!(equivalent_grammar(&perfect[0], &s1, &caps()).unwrap());
        assert!(equivalent_grammar(&perfect[1], &s2, &caps()).unwrap());
        assert!(check_tree(&d, &perfect, Property::Perfect, &caps()).unwrap());
        assert!(check_tree(&d, &perfect, Property::MaximalLocal, &caps()).unwrap());
        assert!(check_tree(&d, &perfect, Property::Local, &caps()).unwrap());

        let shrunk = vec![
            grammar("class: dtd\nmechanism: nre\nroot: s_f1\ns_f1 -> a, a*\n"),
            perfect[1].clone(),
        ];
        assert!(!check_tree(&d, &shrunk, Property::Perfect, &caps()).unwrap());
        assert!(!check_tree(&d, &shrunk, Property::Local, &caps()).unwrap());

        let local = exists_tree(&d, Property::Local, &caps()).unwrap().unwrap();
        assert!(check_tree(&d, &local, Property::Local, &caps()).unwrap());
    }

    #[test]
    fn completeness_is_read_relative_to_the_kernel_shape() {
        // the target also admits a lone `d`, which no extension of this
        // kernel can produce; locality must not require covering it
        let d = design(
            "class: dtd\nmechanism: nre\nroot: s\ns -> (a, b*, c) + d\n",
            "s(@f1, c)",
        );
        let typing = vec![grammar("class: dtd\nmechanism: nre\nroot: s_f1\ns_f1 -> a, b*\n")];
        assert!(check_tree(&d, &typing, Property::Local, &caps()).unwrap());
        // the materializations alone are a strict subset of the target
        let t_tau = build_t_tau(&d.kernel, &typing, &caps()).unwrap();
        assert!(!equivalent_grammar(&t_tau, &d.target, &caps()).unwrap());
    }

    #[test]
    fn local_but_extendable_typing_fails_the_maximality_check() {
        let d = design(
            "class: dtd\nmechanism: nre\nroot: s\ns -> a*, b, c*\n",
            "s(@f1, @f2)",
        );
        let small = vec![
            grammar("class: dtd\nmechanism: nre\nroot: s_f1\ns_f1 -> a*\n"),
            grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> b, c*\n"),
        ];
        assert!(check_tree(&d, &small, Property::Local, &caps()).unwrap());
        assert!(!check_tree(&d, &small, Property::MaximalLocal, &caps()).unwrap());

        let wide = vec![
            grammar("class: dtd\nmechanism: nre\nroot: s_f1\ns_f1 -> a*\n"),
            grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> a*, b, c*\n"),
        ];
        assert!(check_tree(&d, &wide, Property::MaximalLocal, &caps()).unwrap());

        let all = all_maximal_tree(&d, &caps()).unwrap();
        assert_eq!(all.len(), 2);
        // no perfect typing: two incomparable maxima
        assert!(exists_tree(&d, Property::Perfect, &caps()).unwrap().is_none());
        assert!(!check_tree(&d, &wide, Property::Perfect, &caps()).unwrap());
    }

    #[test]
    fn witnesses_specialize_the_designs_per_node() {
        let schema = "class: sdtd\nmechanism: nfa\nroot: r\nr -> x, y\nx -> a#1\ny -> a#2\na#1 -> b*\na#2 -> c*\n";
        let d = design(schema, "r(x(a(@f1)), y(a(@f2)))");
        let designs = induce_sdtd(&d, &caps()).unwrap().unwrap();
        let under_x = designs.iter().find(|i| i.selector.contains("a#1")).unwrap();
        let under_y = designs.iter().find(|i| i.selector.contains("a#2")).unwrap();
        let mut b = BTreeSet::new();
        b.insert("b".to_string());
        let mut c = BTreeSet::new();
        c.insert("c".to_string());
        assert!(Nfa::equivalent(&under_x.design.target, &all_words(&b), &caps()).unwrap());
        assert!(Nfa::equivalent(&under_y.design.target, &all_words(&c), &caps()).unwrap());

        let perfect = exists_tree(&d, Property::Perfect, &caps()).unwrap().unwrap();
        let want_b = grammar("class: dtd\nmechanism: nre\nroot: s_f1\ns_f1 -> b*\n");
        let want_c = grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> c*\n");
        assert!(equivalent_grammar(&perfect[0], &want_b, &caps()).unwrap());
        assert!(equivalent_grammar(&perfect[1], &want_c, &caps()).unwrap());

        // a label the walk cannot place rejects the whole kernel
        let off = design(schema, "r(x(c))");
        assert!(exists_tree(&off, Property::Local, &caps()).unwrap().is_none());
        let err = check_tree(&off, &[], Property::Local, &caps()).unwrap_err();
        assert!(matches!(err, Error::Inconsistent(_)));
    }

    #[test]
    fn inconsistent_typings_are_refused_not_judged() {
        let d = design(
            "class: sdtd\nmechanism: nfa\nroot: r\nr -> a#1*\na#1 -> b + c\n",
            "r(@f1)",
        );
        // materializations force positional a-types: not single-type definable
        let typing = vec![grammar(
            "class: edtd\nmechanism: nfa\nroot: s_f1\ns_f1 -> a#1, a#2\na#1 -> b\na#2 -> c\n",
        )];
        let err = check_tree(&d, &typing, Property::Local, &caps()).unwrap_err();
        assert!(matches!(err, Error::Inconsistent(_)));
    }

    #[test]
    fn leaf_nodes_need_epsilon_in_their_content() {
        let ok = design(
            "class: sdtd\nmechanism: nfa\nroot: r\nr -> a#1\na#1 -> b?\n",
            "r(a)",
        );
        assert!(exists_tree(&ok, Property::Local, &caps()).unwrap().is_some());
        let bad = design(
            "class: sdtd\nmechanism: nfa\nroot: r\nr -> a#1\na#1 -> b\n",
            "r(a)",
        );
        assert!(exists_tree(&bad, Property::Local, &caps()).unwrap().is_none());
    }

    #[test]
    fn single_slot_identity_decides_locality() {
        let schema =
            "class: edtd\nmechanism: nfa\nroot: s0\ns0 -> (a#1 + a#2)*\na#1 -> b*\na#2 -> c\n";
        let d = design(schema, "s0(@f1)");
        let same = vec![grammar(
            "class: edtd\nmechanism: nfa\nroot: s_f1\ns_f1 -> (a#1 + a#2)*\na#1 -> b*\na#2 -> c\n",
        )];
        assert!(edtd_loc(&d, &same, &caps()).unwrap());
        let narrower = vec![grammar(
            "class: edtd\nmechanism: nfa\nroot: s_f1\ns_f1 -> a#1*\na#1 -> b*\n",
        )];
        assert!(!edtd_loc(&d, &narrower, &caps()).unwrap());

        let perfect = exists_tree(&d, Property::Perfect, &caps()).unwrap().unwrap();
        assert!(equivalent_grammar(&perfect[0], &same[0], &caps()).unwrap());
        assert!(check_tree(&d, &perfect, Property::Perfect, &caps()).unwrap());
        assert!(!check_tree(&d, &narrower, Property::Perfect, &caps()).unwrap());
    }

    #[test]
    fn specialization_sets_are_enumerated_in_order() {
        let schema = "class: edtd\nmechanism: nfa\nroot: s0\ns0 -> (a#1, a#2)+\na#1 -> b\na#2 -> c\n";
        let d = design(schema, "s0(@f1, a(@f2), @f3)");

        let all = all_maximal_tree(&d, &caps()).unwrap();
        assert_eq!(all.len(), 2);
        // pinning the inner node to its first specialization types the hole
        // below it with `b`, the second with `c`
        let want_b = grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> b\n");
        let want_c = grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> c\n");
        assert!(equivalent_grammar(&all[0][1], &want_b, &caps()).unwrap());
        assert!(equivalent_grammar(&all[1][1], &want_c, &caps()).unwrap());
        let pairs = grammar(
            "class: edtd\nmechanism: nfa\nroot: s_f1\ns_f1 -> (a#1, a#2)*\na#1 -> b\na#2 -> c\n",
        );
        assert!(equivalent_grammar(&all[0][0], &pairs, &caps()).unwrap());

        let found = exists_tree(&d, Property::Local, &caps()).unwrap().unwrap();
        assert!(edtd_loc(&d, &found, &caps()).unwrap());
        assert!(check_tree(&d, &found, Property::MaximalLocal, &caps()).unwrap());

        // the typing only ever grows the first specialization at the inner node
        let kappa = induced_kappa(&d, &found, &caps()).unwrap();
        assert_eq!(kappa.sets[&2], BTreeSet::from(["a#1".to_string()]));
        assert_eq!(kappa.sets[&0], BTreeSet::from(["s0".to_string()]));

        // both specializations at once leave no room for any slot language,
        // and the deterministic perfection procedure lands exactly there
        assert!(exists_tree(&d, Property::Perfect, &caps()).unwrap().is_none());
    }

    #[test]
    fn perfection_narrows_children_by_position() {
        let schema = "class: edtd\nmechanism: nfa\nroot: s\ns -> a#1, a#2\na#1 -> b*\na#2 -> c?\n";
        let d = design(schema, "s(a(@f1), a(@f2))");
        let perfect = exists_tree(&d, Property::Perfect, &caps()).unwrap().unwrap();
        let want_b = grammar("class: dtd\nmechanism: nre\nroot: s_f1\ns_f1 -> b*\n");
        let want_c = grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> c?\n");
        assert!(equivalent_grammar(&perfect[0], &want_b, &caps()).unwrap());
        assert!(equivalent_grammar(&perfect[1], &want_c, &caps()).unwrap());
        assert!(check_tree(&d, &perfect, Property::Perfect, &caps()).unwrap());

        let shrunk = vec![
            perfect[0].clone(),
            grammar("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> \n"),
        ];
        assert!(!check_tree(&d, &shrunk, Property::Perfect, &caps()).unwrap());
    }

    #[test]
    fn concrete_subtrees_gate_the_search() {
        let schema = "class: edtd\nmechanism: nfa\nroot: s\ns -> d#1, a#1\nd#1 -> e\na#1 -> b*\n";
        let ok = design(schema, "s(d(e), a(@f1))");
        assert!(exists_tree(&ok, Property::Local, &caps()).unwrap().is_some());
        let bad = design(schema, "s(d(x), a(@f1))");
        assert!(exists_tree(&bad, Property::Local, &caps()).unwrap().is_none());

        // kernels without docking points reduce to plain validation
        let fixed = design(schema, "s(d(e), a(b))");
        let found = exists_tree(&fixed, Property::Local, &caps()).unwrap();
        assert!(matches!(found, Some(v) if v.is_empty()));
        assert!(check_tree(&fixed, &[], Property::Perfect, &caps()).unwrap());
        let invalid = design(schema, "s(a(b), d(e))");
        assert!(exists_tree(&invalid, Property::Perfect, &caps()).unwrap().is_none());
    }

    #[test]
    fn class_readings_agree_on_a_flat_design() {
        let flat = "mechanism: nfa\nroot: s\ns -> a*, b\n";
        for kernel in ["s(@f1, b)", "s(@f1, c)"] {
            let verdicts: Vec<bool> = ["class: dtd\n", "class: sdtd\n", "class: edtd\n"]
                .iter()
                .map(|class| {
                    let d = design(&format!("{class}{flat}"), kernel);
                    exists_tree(&d, Property::Local, &caps()).unwrap().is_some()
                })
                .collect();
            assert_eq!(verdicts[0], verdicts[1]);
            assert_eq!(verdicts[1], verdicts[2]);
        }
    }
}

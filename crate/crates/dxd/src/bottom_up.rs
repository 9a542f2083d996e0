//! Bottom-up design analysis: given per-source grammars for the docking
//! points of a kernel document, build the grammar of all materializations,
//! decide whether that set is definable in a requested grammar class, and
//! synthesize the type when it is.

use crate::automata::{minimize, ComposeOp, Nfa};
use crate::document::KernelDoc;
use crate::regex::{is_dre, is_one_unambiguous, nfa_to_regex, to_dre, RegexAst};
use crate::schema::{
    equivalent_grammar, reduce, simplify, ContentModel, Grammar, GrammarClass, Mechanism,
};
use crate::{mu, Caps, Error, Result, Symbol};
use std::collections::BTreeMap;

/// A kernel plus one grammar per docking point (positional), together with
/// the class and mechanism the synthesized type should live in.
#[derive(Clone, Debug)]
pub struct BottomUpDesign {
    pub kernel: KernelDoc,
    pub typing: Vec<Grammar>,
    pub class: GrammarClass,
    pub mech: Mechanism,
}

fn map_ast(r: &RegexAst, f: &impl Fn(&Symbol) -> Symbol) -> RegexAst {
    match r {
        RegexAst::Sym(s) => RegexAst::Sym(f(s)),
        RegexAst::Concat(l, rr) => {
            RegexAst::Concat(Box::new(map_ast(l, f)), Box::new(map_ast(rr, f)))
        }
        RegexAst::Alt(l, rr) => RegexAst::Alt(Box::new(map_ast(l, f)), Box::new(map_ast(rr, f))),
        RegexAst::Opt(x) => RegexAst::Opt(Box::new(map_ast(x, f))),
        RegexAst::Plus(x) => RegexAst::Plus(Box::new(map_ast(x, f))),
        RegexAst::Star(x) => RegexAst::Star(Box::new(map_ast(x, f))),
        other => other.clone(),
    }
}

fn map_model(m: &ContentModel, f: impl Fn(&Symbol) -> Symbol) -> ContentModel {
    match &m.ast {
        Some(a) => ContentModel::from_ast(map_ast(a, &f)),
        None => ContentModel::from_machine(m.nfa().relabel(f)),
    }
}

/// Concatenation of content models, preferring the expression form when
/// every piece has one.
fn concat_models(pieces: &[ContentModel], caps: &Caps) -> Result<ContentModel> {
    if pieces.iter().all(|p| p.ast.is_some()) {
        let ast = pieces
            .iter()
            .map(|p| p.ast.clone().unwrap())
            .fold(RegexAst::Epsilon, |acc, x| {
                RegexAst::Concat(Box::new(acc), Box::new(x))
            });
        return Ok(ContentModel::from_ast(simplify(&ast)));
    }
    let mut acc = Nfa::epsilon_lang(Default::default());
    for p in pieces {
        acc = Nfa::compose(ComposeOp::Concat, &acc, p.nfa(), caps)?;
    }
    Ok(ContentModel::from_machine(acc))
}

struct RenamedLocal {
    root_model: ContentModel,
    rules: Vec<(Symbol, ContentModel)>,
}

/// Rename every specialized name of a local grammar so alphabets of
/// distinct sources cannot collide, preserving base symbols. The root rule
/// is split off: at the docking point only its content model survives.
fn rename_local(g: &Grammar, sfx: &str) -> Result<RenamedLocal> {
    let root_base = mu(&g.root).to_string();
    for name in &g.names {
        if *name != g.root {
            for occ in g.rules[name].symbols() {
                if mu(&occ) == root_base {
                    return Err(Error::Unsupported(format!(
                        "root label `{root_base}` of a source grammar reoccurs inside it at `{name}`"
                    )));
                }
            }
        }
    }
    if g.rules[&g.root].symbols().iter().any(|s| mu(s) == root_base) {
        return Err(Error::Unsupported(format!(
            "root label `{root_base}` of a source grammar reoccurs in its own content"
        )));
    }
    let rename = |n: &Symbol| -> Symbol {
        if n.contains('#') {
            format!("{n}.{sfx}")
        } else {
            format!("{n}#{sfx}")
        }
    };
    let root_model = map_model(&g.rules[&g.root], rename);
    let rules = g
        .names
        .iter()
        .filter(|n| **n != g.root)
        .map(|n| (rename(n), map_model(&g.rules[n], rename)))
        .collect();
    Ok(RenamedLocal { root_model, rules })
}

/// The grammar of all materializations: one fresh witness name per kernel
/// node, docking points inlined with their source's root content model.
/// Output size is linear in the inputs.
pub fn build_t_tau(kernel: &KernelDoc, typing: &[Grammar], caps: &Caps) -> Result<Grammar> {
    if typing.len() != kernel.arity() {
        return Err(Error::Arity {
            expected: kernel.arity(),
            got: typing.len(),
        });
    }
    let mut locals: BTreeMap<&Symbol, RenamedLocal> = BTreeMap::new();
    for (i, f) in kernel.functions.iter().enumerate() {
        locals.insert(f, rename_local(&typing[i], f.trim_start_matches('@'))?);
    }
    // pre-order numbering of kernel nodes; element nodes get fresh names
    let mut order: Vec<&crate::document::UTree> = Vec::new();
    fn walk<'a>(t: &'a crate::document::UTree, out: &mut Vec<&'a crate::document::UTree>) {
        out.push(t);
        for c in &t.children {
            walk(c, out);
        }
    }
    walk(&kernel.tree, &mut order);
    let mut node_name: BTreeMap<*const crate::document::UTree, Symbol> = BTreeMap::new();
    for (i, node) in order.iter().enumerate() {
        if !crate::is_function_symbol(&node.label) {
            if node.label.contains('#') {
                return Err(Error::Unsupported(format!(
                    "kernel label `{}` may not carry a specialization tag",
                    node.label
                )));
            }
            node_name.insert(*node as *const _, format!("{}#n{}", node.label, i));
        }
    }
    let mut rules: Vec<(Symbol, ContentModel)> = Vec::new();
    for node in &order {
        if crate::is_function_symbol(&node.label) {
            continue;
        }
        let pieces: Vec<ContentModel> = node
            .children
            .iter()
            .map(|c| {
                if crate::is_function_symbol(&c.label) {
                    locals[&c.label].root_model.clone()
                } else {
                    ContentModel::from_ast(RegexAst::Sym(
                        node_name[&(c as *const _)].clone(),
                    ))
                }
            })
            .collect();
        rules.push((
            node_name[&(*node as *const _)].clone(),
            concat_models(&pieces, caps)?,
        ));
    }
    for f in &kernel.functions {
        for (name, model) in &locals[f].rules {
            rules.push((name.clone(), model.clone()));
        }
    }
    let root = node_name[&(order[0] as *const _)].clone();
    reduce(&Grammar::assemble(GrammarClass::Edtd, Mechanism::Nfa, root, rules))
}

/// Same grammar re-rooted at one of its names.
fn reroot(g: &Grammar, name: &Symbol) -> Result<Grammar> {
    let mut r = g.clone();
    r.root = name.clone();
    r.class = GrammarClass::Edtd;
    reduce(&r)
}

/// Replace `from` by `into` in every rule and drop `from`.
fn merge_names(g: &Grammar, from: &Symbol, into: &Symbol) -> Grammar {
    let subst = |n: &Symbol| -> Symbol {
        if n == from {
            into.clone()
        } else {
            n.clone()
        }
    };
    let names: Vec<Symbol> = g.names.iter().filter(|n| *n != from).cloned().collect();
    let rules = names
        .iter()
        .map(|n| (n.clone(), map_model(&g.rules[n], subst)))
        .collect();
    Grammar {
        class: g.class,
        mech: g.mech,
        names,
        rules,
        root: subst(&g.root),
        was_reduced: g.was_reduced,
    }
}

/// Witness-merging fixpoint: while two specializations of one element
/// compete inside a content model, merge them if their subtree languages
/// coincide, otherwise no single-type grammar can define the language.
/// Violations are located bottom-up (reverse witness order), merges keep
/// the earlier name.
fn merged_single_type(mut m: Grammar, caps: &Caps) -> Result<Option<Grammar>> {
    'outer: loop {
        let idx: BTreeMap<&Symbol, usize> =
            m.names.iter().enumerate().map(|(i, n)| (n, i)).collect();
        for name in m.names.iter().rev() {
            let mut by_base: BTreeMap<Symbol, Vec<usize>> = BTreeMap::new();
            for occ in m.rules[name].symbols() {
                by_base.entry(mu(&occ).to_string()).or_default().push(idx[&occ]);
            }
            let mut competing: Vec<(usize, usize)> = by_base
                .values()
                .filter(|v| v.len() >= 2)
                .map(|v| {
                    let mut v = v.clone();
                    v.sort_unstable();
                    (v[0], v[1])
                })
                .collect();
            competing.sort_unstable();
            if let Some((keep, drop)) = competing.first() {
                let keep = m.names[*keep].clone();
                let drop = m.names[*drop].clone();
                let equal = equivalent_grammar(&reroot(&m, &keep)?, &reroot(&m, &drop)?, caps)?;
                if !equal {
                    return Ok(None);
                }
                m = merge_names(&m, &drop, &keep);
                continue 'outer;
            }
        }
        break;
    }
    m.class = GrammarClass::Sdtd;
    debug_assert!(m.is_single_type());
    Ok(Some(m))
}

fn mu_projected(m: &ContentModel) -> ContentModel {
    map_model(m, |s| mu(s).to_string())
}

/// Flatten a single-type grammar to one rule per base symbol; requires all
/// specializations of each base to agree after projection.
fn flattened(m: &Grammar, caps: &Caps) -> Result<Option<Grammar>> {
    let mut rep: BTreeMap<Symbol, ContentModel> = BTreeMap::new();
    let mut names: Vec<Symbol> = Vec::new();
    for n in &m.names {
        let base = mu(n).to_string();
        let proj = mu_projected(&m.rules[n]);
        match rep.get(&base) {
            Some(first) => {
                if !Nfa::equivalent(first.nfa(), proj.nfa(), caps)? {
                    return Ok(None);
                }
            }
            None => {
                names.push(base.clone());
                rep.insert(base, proj);
            }
        }
    }
    let rules = names.iter().map(|n| (n.clone(), rep[n].clone())).collect();
    let flat = Grammar::assemble(
        GrammarClass::Dtd,
        m.mech,
        mu(&m.root).to_string(),
        rules,
    );
    Ok(Some(reduce(&flat)?))
}

fn models_one_unambiguous(g: &Grammar, caps: &Caps) -> Result<bool> {
    for n in &g.names {
        if !is_one_unambiguous(g.rules[n].nfa(), caps)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Is the set of materializations definable in the design's class (and,
/// for the dRE mechanism, with one-unambiguous content models)?
pub fn cons(d: &BottomUpDesign, caps: &Caps) -> Result<bool> {
    match d.class {
        GrammarClass::Edtd => Ok(true),
        GrammarClass::Sdtd => {
            let t = build_t_tau(&d.kernel, &d.typing, caps)?;
            match merged_single_type(t, caps)? {
                None => Ok(false),
                Some(m) => match d.mech {
                    Mechanism::Dre => models_one_unambiguous(&m, caps),
                    _ => Ok(true),
                },
            }
        }
        GrammarClass::Dtd => {
            let t = build_t_tau(&d.kernel, &d.typing, caps)?;
            let Some(m) = merged_single_type(t, caps)? else {
                return Ok(false);
            };
            match flattened(&m, caps)? {
                None => Ok(false),
                Some(flat) => match d.mech {
                    Mechanism::Dre => models_one_unambiguous(&flat, caps),
                    _ => Ok(true),
                },
            }
        }
    }
}

/// Rebuild every content model in the given mechanism.
pub fn realize_mechanism(g: &Grammar, mech: Mechanism, caps: &Caps) -> Result<Grammar> {
    let rules = g
        .names
        .iter()
        .map(|name| {
            let model = &g.rules[name];
            let model = match mech {
                Mechanism::Nfa => model.clone(),
                Mechanism::Dfa => {
                    ContentModel::from_machine(minimize(&model.nfa().determinize(caps)?).into_nfa())
                }
                Mechanism::Nre => match &model.ast {
                    Some(a) => ContentModel::from_ast(a.clone()),
                    None => ContentModel::from_ast(nfa_to_regex(model.nfa(), caps)?),
                },
                Mechanism::Dre => match &model.ast {
                    Some(a) if is_dre(a) => ContentModel::from_ast(a.clone()),
                    _ => match to_dre(model.nfa(), caps)? {
                        Some(a) => ContentModel::from_ast(a),
                        None => {
                            return Err(Error::NotRepresentable(format!(
                                "no deterministic expression for the content of `{name}`"
                            )))
                        }
                    },
                },
            };
            Ok((name.clone(), model))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Grammar::assemble(g.class, mech, g.root.clone(), rules);
    out.was_reduced = g.was_reduced;
    Ok(out)
}

/// The synthesized global type, absent when the design is not consistent
/// with its class.
pub fn synthesize_type(d: &BottomUpDesign, caps: &Caps) -> Result<Option<Grammar>> {
    let t = build_t_tau(&d.kernel, &d.typing, caps)?;
    let g = match d.class {
        GrammarClass::Edtd => t,
        GrammarClass::Sdtd => match merged_single_type(t, caps)? {
            Some(m) => m,
            None => return Ok(None),
        },
        GrammarClass::Dtd => {
            let Some(m) = merged_single_type(t, caps)? else {
                return Ok(None);
            };
            match flattened(&m, caps)? {
                Some(flat) => flat,
                None => return Ok(None),
            }
        }
    };
    if d.mech == Mechanism::Dre && d.class != GrammarClass::Edtd {
        // the class check already failed the grammar if some model has no
        // deterministic expression
        if !models_one_unambiguous(&g, caps)? {
            return Ok(None);
        }
    }
    let g = realize_mechanism(&g, d.mech, caps)?;
    Ok(Some(reduce(&g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{parse_kernel, parse_tree, validate, Extension, materialize};
    use crate::schema::load_schema;

    fn caps() -> Caps {
        Caps::default()
    }

    fn leafy(root_rule: &str) -> Grammar {
        load_schema(
            &format!("class: edtd\nroot: src\nsrc -> {root_rule}\n"),
            &caps(),
        )
        .unwrap()
    }

    #[test]
    fn materialization_grammar() {
        // two docking points feeding b* and d* between fixed siblings
        let k = parse_kernel("s0(a, @f1, c, @f2)").unwrap();
        let t = build_t_tau(&k, &[leafy("b*"), leafy("d*")], &caps()).unwrap();
        let root_model = t.rules[&t.root].nfa().relabel(|s| mu(s).to_string());
        let want = crate::regex::to_nfa(&crate::regex::parse_regex("a, b*, c, d*", &caps()).unwrap());
        assert!(Nfa::equivalent(&root_model, &want, &caps()).unwrap());

        for ext in ["s0(a, c)", "s0(a, b, b, c, d)"] {
            assert!(validate(&parse_tree(ext).unwrap(), &t));
        }
        for bad in ["s0(a, c, c)", "s0(b, a, c)", "s0(a, b)"] {
            assert!(!validate(&parse_tree(bad).unwrap(), &t));
        }
    }

    #[test]
    fn no_functions_means_singleton() {
        let k = parse_kernel("s(a(b), c)").unwrap();
        let t = build_t_tau(&k, &[], &caps()).unwrap();
        assert!(validate(&k.tree, &t));
        for bad in ["s(a, c)", "s(a(b), c, c)", "s(c, a(b))"] {
            assert!(!validate(&parse_tree(bad).unwrap(), &t));
        }
    }

    #[test]
    fn single_function_relabels_source() {
        let k = parse_kernel("s(@f1)").unwrap();
        let src = load_schema(
            "class: edtd\nroot: r\nr -> a#1 + a#2\na#1 -> b\na#2 ->\n",
            &caps(),
        )
        .unwrap();
        let t = build_t_tau(&k, &[src], &caps()).unwrap();
        let want = load_schema(
            "class: edtd\nroot: s\ns -> a#1 + a#2\na#1 -> b\na#2 ->\n",
            &caps(),
        )
        .unwrap();
        assert!(equivalent_grammar(&t, &want, &caps()).unwrap());
    }

    #[test]
    fn materializations_validate() {
        let k = parse_kernel("s0(a, @f1, c, @f2)").unwrap();
        let t = build_t_tau(&k, &[leafy("b*"), leafy("d?")], &caps()).unwrap();
        let mut e = Extension::default();
        e.assignment.insert("@f1".into(), parse_tree("src(b, b)").unwrap());
        e.assignment.insert("@f2".into(), parse_tree("src(d)").unwrap());
        let m = materialize(&k, &e).unwrap();
        assert!(validate(&m, &t));
        // violating the second source's grammar must break membership
        e.assignment.insert("@f2".into(), parse_tree("src(d, d)").unwrap());
        let m = materialize(&k, &e).unwrap();
        assert!(!validate(&m, &t));
    }

    #[test]
    fn consistency_by_class() {
        let k = parse_kernel("s0(a, @f1, c, @f2)").unwrap();
        let typing = vec![leafy("b*"), leafy("d*")];
        for class in [GrammarClass::Dtd, GrammarClass::Sdtd, GrammarClass::Edtd] {
            let d = BottomUpDesign {
                kernel: k.clone(),
                typing: typing.clone(),
                class,
                mech: Mechanism::Dre,
            };
            assert!(cons(&d, &caps()).unwrap(), "{class:?}");
        }

        // sibling a-nodes with different materialization languages
        let k = parse_kernel("s(a(@f1, @f2), a(@f3))").unwrap();
        let typing = vec![leafy("b*"), leafy("c*"), leafy("(b + c)*")];
        for class in [GrammarClass::Dtd, GrammarClass::Sdtd] {
            let d = BottomUpDesign {
                kernel: k.clone(),
                typing: typing.clone(),
                class,
                mech: Mechanism::Nfa,
            };
            assert!(!cons(&d, &caps()).unwrap(), "{class:?}");
        }
        let d = BottomUpDesign {
            kernel: k,
            typing,
            class: GrammarClass::Edtd,
            mech: Mechanism::Nfa,
        };
        assert!(cons(&d, &caps()).unwrap());

        // same-label nodes under different parents: fine for single-type,
        // impossible flat
        let k = parse_kernel("s(a(@f1), b(a(@f2)))").unwrap();
        let typing = vec![leafy("c*"), leafy("d*")];
        let sd = BottomUpDesign {
            kernel: k.clone(),
            typing: typing.clone(),
            class: GrammarClass::Sdtd,
            mech: Mechanism::Nfa,
        };
        assert!(cons(&sd, &caps()).unwrap());
        let dt = BottomUpDesign {
            kernel: k,
            typing,
            class: GrammarClass::Dtd,
            mech: Mechanism::Nfa,
        };
        assert!(!cons(&dt, &caps()).unwrap());
    }

    #[test]
    fn synthesis_matches_materialization_grammar() {
        let k = parse_kernel("s0(a, @f1, c, @f2)").unwrap();
        let typing = vec![leafy("b*"), leafy("d*")];
        let reference = build_t_tau(&k, &typing, &caps()).unwrap();
        for class in [GrammarClass::Dtd, GrammarClass::Sdtd, GrammarClass::Edtd] {
            for mech in [Mechanism::Nfa, Mechanism::Dfa, Mechanism::Nre, Mechanism::Dre] {
                let d = BottomUpDesign {
                    kernel: k.clone(),
                    typing: typing.clone(),
                    class,
                    mech,
                };
                let g = synthesize_type(&d, &caps()).unwrap().unwrap();
                assert!(equivalent_grammar(&g, &reference, &caps()).unwrap());
                assert_eq!(g.mech, mech);
                if class == GrammarClass::Dtd {
                    assert!(g.names.iter().all(|n| mu(n) == n.as_str()));
                }
                if class != GrammarClass::Edtd {
                    assert!(g.is_single_type());
                }
            }
        }
        // the flat synthesis reproduces the expected child model exactly
        let d = BottomUpDesign {
            kernel: k,
            typing,
            class: GrammarClass::Dtd,
            mech: Mechanism::Dre,
        };
        let g = synthesize_type(&d, &caps()).unwrap().unwrap();
        let want = load_schema("class: dtd\nroot: s0\ns0 -> a, b*, c, d*\n", &caps()).unwrap();
        assert!(equivalent_grammar(&g, &want, &caps()).unwrap());
    }

    #[test]
    fn inconsistent_synthesis_is_absent() {
        let k = parse_kernel("s(a(@f1, @f2), a(@f3))").unwrap();
        let d = BottomUpDesign {
            kernel: k,
            typing: vec![leafy("b*"), leafy("c*"), leafy("(b + c)*")],
            class: GrammarClass::Sdtd,
            mech: Mechanism::Nfa,
        };
        assert!(synthesize_type(&d, &caps()).unwrap().is_none());
    }

    #[test]
    fn root_reuse_is_rejected() {
        let k = parse_kernel("s(@f1)").unwrap();
        let bad = load_schema("class: edtd\nroot: r\nr -> a\na -> r?\n", &caps()).unwrap();
        assert!(matches!(
            build_t_tau(&k, &[bad], &caps()),
            Err(Error::Unsupported(_))
        ));
    }
}

// Cross-module properties that tie the per-node machinery to plain
// enumeration: the friend sets computed for a typing must carve up each
// node's subtree language exactly, shrinking a typing must shrink them,
// and the class tag alone must not change existence verdicts.

mod common;

use std::collections::BTreeSet;

use common::*;
use dxd::automata::Nfa;
use dxd::bottom_up::build_t_tau;
use dxd::document::{parse_kernel, UTree};
use dxd::regex::print_regex;
use dxd::schema::{normalize, ContentModel, Grammar, GrammarClass, Mechanism};
use dxd::tree_typing::{exists_tree, extension_grammar, induced_kappa, Property, TreeDesign};
use dxd::word_typing::is_admissible;
use dxd::{is_function_symbol, Error, Symbol};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn preorder_labels(t: &UTree) -> Vec<(Symbol, bool)> {
    fn go(t: &UTree, out: &mut Vec<(Symbol, bool)>) {
        out.push((t.label.clone(), is_function_symbol(&t.label)));
        for c in &t.children {
            go(c, out);
        }
    }
    let mut out = Vec::new();
    go(t, &mut out);
    out
}

fn element_bases(d: &TreeDesign) -> BTreeSet<Symbol> {
    let mut bases = d.target.alphabet();
    for (label, is_fn) in preorder_labels(&d.kernel.tree) {
        if !is_fn {
            bases.insert(label);
        }
    }
    bases
}

/// A two-letter grammar with competing specializations of `a`.
fn random_specialized_grammar(r: &mut ChaCha8Rng) -> Option<Grammar> {
    let syms = ["a#1", "a#2"];
    let rules = vec![
        (
            Symbol::from("s"),
            ContentModel::from_ast(random_regex(r, &syms, 5)),
        ),
        (
            Symbol::from("a#1"),
            ContentModel::from_ast(random_regex(r, &syms, 3)),
        ),
        (
            Symbol::from("a#2"),
            ContentModel::from_ast(random_regex(r, &syms, 3)),
        ),
    ];
    let g = Grammar::assemble(GrammarClass::Edtd, Mechanism::Nre, "s".into(), rules);
    dxd::schema::reduce(&g).ok()
}

/// Trees of the pool accepted by `g` at its root, small ones preferred.
fn pick_member(r: &mut ChaCha8Rng, pool: &TreePool, g: &Grammar, max_nodes: usize) -> Option<usize> {
    let table = pool.derivable_table(g);
    let members: Vec<usize> = (0..pool.len())
        .filter(|&i| table[i].contains(&g.root) && pool.tree(i).size() <= max_nodes)
        .collect();
    if members.is_empty() {
        None
    } else {
        Some(members[r.gen_range(0..members.len())])
    }
}

#[test]
fn friend_sets_carve_up_each_node_language() {
    // for a local typing, membership below a kernel node factors into
    // "fits the kernel there" and "derivable from one of the node's
    // friends", checked against plain enumeration of small trees
    let pool = TreePool::enumerate(&["s", "a"], 6);
    let mut r = rng(1101);
    let mut done = 0;
    let mut attempts = 0;
    while done < 8 && attempts < 120 {
        attempts += 1;
        let Some(g) = random_specialized_grammar(&mut r) else {
            continue;
        };
        let Some(base_id) = pick_member(&mut r, &pool, &g, 4) else {
            continue;
        };
        let n_funcs = 1 + attempts % 2;
        let kernel = inject_functions(&mut r, &pool.tree(base_id), n_funcs);
        let Ok(d) = TreeDesign::new(g, kernel) else {
            continue;
        };
        let typing = match exists_tree(&d, Property::Local, &caps()) {
            Ok(Some(t)) => t,
            Ok(None) => continue,
            Err(Error::ResourceCap(_)) => continue,
            Err(e) => panic!("unexpected search error: {e}"),
        };

        let t_tau = build_t_tau(&d.kernel, &typing, &caps()).unwrap();
        let ext = extension_grammar(&d.kernel, &element_bases(&d), &caps()).unwrap();
        let norm = normalize(&d.target, &caps()).unwrap();
        let grown_table = pool.derivable_table(&t_tau);
        let scope_table = pool.derivable_table(&ext);
        let name_table = pool.derivable_table(&norm);
        let kappa = induced_kappa(&d, &typing, &caps()).unwrap();

        for (id, (label, is_fn)) in preorder_labels(&d.kernel.tree).iter().enumerate() {
            if *is_fn {
                continue;
            }
            let node_name: Symbol = format!("{label}#n{id}");
            assert!(
                t_tau.rules.contains_key(&node_name),
                "node numbering must match the built grammar"
            );
            let friends = &kappa.sets[&id];
            for t_id in 0..pool.len() {
                let grown = grown_table[t_id].contains(&node_name);
                let scoped = scope_table[t_id].contains(&node_name);
                let named = friends.iter().any(|f| name_table[t_id].contains(f));
                if grown != (scoped && named) {
                    eprintln!("--- design {done} ---");
                    eprintln!("target:\n{}", dxd::schema::print_schema(&d.target, &caps()).unwrap());
                    eprintln!("kernel: {}", d.kernel.tree);
                    for (i, t) in typing.iter().enumerate() {
                        eprintln!("typing {i}:\n{}", dxd::schema::print_schema(t, &caps()).unwrap());
                    }
                    eprintln!("norm:\n{}", dxd::schema::print_schema(&norm, &caps()).unwrap());
                    eprintln!("kappa: {kappa}");
                    eprintln!(
                        "node {id} name {node_name} tree {} grown={grown} scoped={scoped} named={named} friends={friends:?} norm_names={:?}",
                        pool.tree(t_id),
                        name_table[t_id]
                    );
                }
                assert_eq!(
                    grown,
                    scoped && named,
                    "node {id} ({label}) disagrees on {}",
                    pool.tree(t_id)
                );
            }
        }
        done += 1;
    }
    assert!(done >= 8, "only {done} designs reached the comparison");
}

/// Replace the root content with its intersection with a random language.
fn shrink_typing(r: &mut ChaCha8Rng, typing: &[Grammar]) -> Option<Vec<Grammar>> {
    typing
        .iter()
        .map(|g| {
            let content = g.rules[&g.root].nfa();
            let symbols = g.rules[&g.root].symbols();
            if symbols.is_empty() {
                return None;
            }
            let letters: Vec<&str> = symbols.iter().map(|s| s.as_str()).collect();
            let cut = random_regex_nfa(r, &letters, 4);
            let shrunk = intersect(content, &cut);
            if !is_admissible(&shrunk) {
                return None;
            }
            let mut out = g.clone();
            out.mech = Mechanism::Nfa;
            out.rules
                .insert(g.root.clone(), ContentModel::from_machine(shrunk.trim()));
            Some(out)
        })
        .collect()
}

#[test]
fn shrinking_a_sound_typing_shrinks_the_friend_sets() {
    let mut r = rng(1102);
    let mut designs: Vec<(TreeDesign, Vec<Grammar>)> = Vec::new();

    // the statistics design carries a perfect typing
    let stats = TreeDesign::new(
        grammar(
            "
class: dtd
mechanism: dre
root: eurostat
eurostat -> averages, nationalIndex*
averages -> (Good, index+)+
nationalIndex -> country, Good, (index + (value, year))
index -> value, year
country ->
Good ->
value ->
year ->
",
        ),
        parse_kernel("eurostat(averages(Good, index(value, year)), @f1, @f2)").unwrap(),
    )
    .unwrap();
    let tp = exists_tree(&stats, Property::Perfect, &caps()).unwrap().unwrap();
    designs.push((stats, tp));

    let mut attempts = 0;
    while designs.len() < 6 && attempts < 200 {
        attempts += 1;
        let g = random_flat_grammar(&mut r, &["s", "a", "b"]);
        let base = sample_tree(&mut r, &g, &"s".to_string(), 3);
        if base.size() > 5 {
            continue;
        }
        let n_funcs = 1 + attempts % 2;
        let kernel = inject_functions(&mut r, &base, n_funcs);
        let Ok(d) = TreeDesign::new(g, kernel) else {
            continue;
        };
        match exists_tree(&d, Property::Perfect, &caps()) {
            Ok(Some(t)) => designs.push((d, t)),
            Ok(None) => {}
            Err(Error::ResourceCap(_)) => {}
            Err(e) => panic!("unexpected search error: {e}"),
        }
    }
    assert!(designs.len() >= 6, "only {} perfect designs", designs.len());

    let mut shrinks = 0;
    for (d, tp) in &designs {
        let kappa = induced_kappa(d, tp, &caps()).unwrap();
        for _ in 0..4 {
            let Some(smaller) = shrink_typing(&mut r, tp) else {
                continue;
            };
            // a slotwise sublanguage of a sound typing stays sound
            let kappa2 = induced_kappa(d, &smaller, &caps()).unwrap();
            for (id, friends) in &kappa2.sets {
                assert!(
                    friends.is_subset(&kappa.sets[id]),
                    "shrinking must not add friends at node {id}"
                );
            }
            shrinks += 1;
        }
    }
    assert!(shrinks >= 8, "only {shrinks} shrunk typings were exercised");
}

#[test]
fn class_tag_does_not_change_existence_verdicts() {
    let mut r = rng(1103);
    let mut compared = 0;
    let mut attempts = 0;
    while compared < 20 && attempts < 120 {
        attempts += 1;
        let g = random_flat_grammar(&mut r, &["s", "a", "b"]);
        let base = sample_tree(&mut r, &g, &"s".to_string(), 3);
        if base.size() > 6 {
            continue;
        }
        let n_funcs = 1 + attempts % 2;
        let kernel = inject_functions(&mut r, &base, n_funcs);
        let mut verdicts = Vec::new();
        for class in [GrammarClass::Dtd, GrammarClass::Sdtd, GrammarClass::Edtd] {
            let mut tagged = g.clone();
            tagged.class = class;
            let d = match TreeDesign::new(tagged, kernel.clone()) {
                Ok(d) => d,
                Err(e) => panic!("retagging must stay well-formed: {e}"),
            };
            match exists_tree(&d, Property::Local, &caps()) {
                Ok(v) => verdicts.push(v.is_some()),
                Err(Error::ResourceCap(_)) => break,
                Err(e) => panic!("unexpected search error: {e}"),
            }
        }
        if verdicts.len() < 3 {
            continue;
        }
        assert!(
            verdicts.iter().all(|&v| v == verdicts[0]),
            "class readings disagree: {verdicts:?}"
        );
        compared += 1;
    }
    assert!(compared >= 20, "only {compared} designs compared");
}

#[test]
fn slot_unions_accept_exactly_the_completable_words() {
    // w sits in a slot union exactly when pinning that slot to w, with the
    // other slots left unconstrained, still meets the target
    let mut r = rng(1104);
    let universal = lang("(a + b)*");
    let mut cases = 0;
    let mut attempts = 0;
    while cases < 60 && attempts < 200 {
        attempts += 1;
        let d = random_word_design(&mut r, &["a", "b"]);
        let Ok(p) = dxd::word_typing::build_perfect(&d.target, &d.kernel, &caps()) else {
            continue;
        };
        if !dxd::word_typing::compatible(&p) {
            continue;
        }
        let omega = dxd::word_typing::omega_typing(&p).unwrap();
        let words = words_up_to(&d.target.alphabet, 5);
        for (slot, om) in omega.iter().enumerate() {
            for w in &words {
                let fits = om.accepts(w);
                let typing: Vec<Nfa> = (0..omega.len())
                    .map(|j| if j == slot { word_nfa(w) } else { universal.clone() })
                    .collect();
                let full = dxd::word_typing::w_tau(&d.kernel, &typing, &caps()).unwrap();
                let direct = !intersect(&full, &d.target).is_empty_lang();
                assert_eq!(fits, direct, "slot {slot} disagrees on {w:?}");
            }
        }
        cases += 1;
    }
    assert!(cases >= 60, "only {cases} designs enumerated");
}

fn word_nfa(w: &[Symbol]) -> Nfa {
    if w.is_empty() {
        return lang("%e");
    }
    let text: Vec<&str> = w.iter().map(|s| s.as_str()).collect();
    lang(&text.join(", "))
}

//! Ordered unranked trees, kernel documents with docking points, extension,
//! and validation against the three grammar classes.

use crate::schema::{Grammar, GrammarClass};
use crate::{is_function_symbol, mu, Error, Result, Symbol};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Finite ordered unranked tree; child order is significant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct UTree {
    pub label: Symbol,
    pub children: Vec<UTree>,
}

impl UTree {
    pub fn leaf(label: impl Into<Symbol>) -> UTree {
        UTree {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<Symbol>, children: Vec<UTree>) -> UTree {
        UTree {
            label: label.into(),
            children,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(UTree::size).sum::<usize>()
    }

    /// Child labels in order.
    pub fn child_string(&self) -> Vec<Symbol> {
        self.children.iter().map(|c| c.label.clone()).collect()
    }

    /// Relabel every node through a function (μ-projection and friends).
    pub fn map_labels(&self, f: &impl Fn(&str) -> Symbol) -> UTree {
        UTree {
            label: f(&self.label),
            children: self.children.iter().map(|c| c.map_labels(f)).collect(),
        }
    }

    pub fn labels(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels(&self, out: &mut BTreeSet<Symbol>) {
        out.insert(self.label.clone());
        for c in &self.children {
            c.collect_labels(out);
        }
    }
}

impl fmt::Display for UTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Kernel: a tree whose leaves may be docking points `@f`; the root is an
/// element node, no docking point occurs twice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelDoc {
    pub tree: UTree,
    /// docking points in document order, `@`-form
    pub functions: Vec<Symbol>,
}

/// Assignment of one tree per docking point; root labels are discarded on
/// materialization.
#[derive(Clone, Debug, Default)]
pub struct Extension {
    pub assignment: BTreeMap<Symbol, UTree>,
}

// ----------------------------------------------------------------- parsing

fn is_label_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '#' | '.' | '-')
}

struct TreeParser<'a> {
    chars: Vec<(usize, char)>,
    i: usize,
    text: &'a str,
}

impl<'a> TreeParser<'a> {
    fn skip_ws(&mut self) {
        while self
            .chars
            .get(self.i)
            .map(|(_, c)| c.is_whitespace() || *c == ',')
            .unwrap_or(false)
        {
            self.i += 1;
        }
    }

    fn pos(&self) -> usize {
        self.chars.get(self.i).map(|(p, _)| *p).unwrap_or(self.text.len())
    }

    fn label(&mut self) -> Result<Symbol> {
        let mut s = String::new();
        if let Some((_, '@')) = self.chars.get(self.i) {
            s.push('@');
            self.i += 1;
        }
        let start = self.i;
        while self.chars.get(self.i).map(|(_, c)| is_label_char(*c)).unwrap_or(false) {
            s.push(self.chars[self.i].1);
            self.i += 1;
        }
        if self.i == start {
            return Err(Error::Syntax {
                pos: self.pos(),
                msg: "expected a node label".into(),
            });
        }
        Ok(s)
    }

    fn tree(&mut self) -> Result<UTree> {
        self.skip_ws();
        let label = self.label()?;
        self.skip_ws();
        let mut children = Vec::new();
        if let Some((_, '(')) = self.chars.get(self.i) {
            self.i += 1;
            self.skip_ws();
            while !matches!(self.chars.get(self.i), Some((_, ')'))) {
                if self.chars.get(self.i).is_none() {
                    return Err(Error::Syntax {
                        pos: self.pos(),
                        msg: "unclosed `(` in tree term".into(),
                    });
                }
                children.push(self.tree()?);
                self.skip_ws();
            }
            self.i += 1;
        }
        Ok(UTree { label, children })
    }
}

/// Term syntax: `label(child, child, ...)`; commas optional, whitespace
/// insignificant, docking points written `@name`.
pub fn parse_tree(text: &str) -> Result<UTree> {
    let mut p = TreeParser {
        chars: text.char_indices().collect(),
        i: 0,
        text,
    };
    let t = p.tree()?;
    p.skip_ws();
    if p.i != p.chars.len() {
        return Err(Error::Syntax {
            pos: p.pos(),
            msg: "trailing input after tree term".into(),
        });
    }
    Ok(t)
}

pub fn parse_kernel(text: &str) -> Result<KernelDoc> {
    kernel_of_tree(parse_tree(text)?)
}

/// Check the kernel invariants and collect docking points in document order.
pub fn kernel_of_tree(tree: UTree) -> Result<KernelDoc> {
    if is_function_symbol(&tree.label) {
        return Err(Error::FunctionRoot(tree.label.clone()));
    }
    let mut functions = Vec::new();
    collect_functions(&tree, &mut functions)?;
    let mut seen = BTreeSet::new();
    for f in &functions {
        if !seen.insert(f.clone()) {
            return Err(Error::DuplicateFunction(f.clone()));
        }
    }
    Ok(KernelDoc { tree, functions })
}

fn collect_functions(t: &UTree, out: &mut Vec<Symbol>) -> Result<()> {
    if is_function_symbol(&t.label) {
        if !t.children.is_empty() {
            return Err(Error::FunctionNotLeaf(t.label.clone()));
        }
        out.push(t.label.clone());
        return Ok(());
    }
    for c in &t.children {
        collect_functions(c, out)?;
    }
    Ok(())
}

impl KernelDoc {
    pub fn arity(&self) -> usize {
        self.functions.len()
    }

    /// Child-label word of a node; docking points appear in `@`-form.
    pub fn kernel_string(node: &UTree) -> Vec<Symbol> {
        node.child_string()
    }
}

/// Replace each docking point by the child forest of its assigned tree.
pub fn materialize(k: &KernelDoc, e: &Extension) -> Result<UTree> {
    for f in &k.functions {
        if !e.assignment.contains_key(f) {
            return Err(Error::MissingAssignment(f.clone()));
        }
    }
    Ok(expand(&k.tree, &e.assignment))
}

fn expand(t: &UTree, a: &BTreeMap<Symbol, UTree>) -> UTree {
    let mut children = Vec::new();
    for c in &t.children {
        if is_function_symbol(&c.label) {
            children.extend(a[&c.label].children.iter().cloned());
        } else {
            children.push(expand(c, a));
        }
    }
    UTree {
        label: t.label.clone(),
        children,
    }
}

// -------------------------------------------------------------- validation

/// Tree-language membership. Local check per node for a DTD; witness
/// existence via a bottom-up run for the specialized classes.
pub fn validate(t: &UTree, g: &Grammar) -> bool {
    match g.class {
        GrammarClass::Dtd => t.label == g.root && valid_dtd(t, g),
        _ => derivable_names(t, g).contains(&g.root),
    }
}

fn valid_dtd(t: &UTree, g: &Grammar) -> bool {
    let Some(model) = g.rules.get(&t.label) else {
        return false;
    };
    model.nfa().accepts(&t.child_string()) && t.children.iter().all(|c| valid_dtd(c, g))
}

/// Names ã with μ(ã) = lab(x) whose content model admits some choice of
/// derivable names of the children (one bottom-up state-set pass).
pub fn derivable_names(t: &UTree, g: &Grammar) -> BTreeSet<Symbol> {
    let child_sets: Vec<BTreeSet<Symbol>> =
        t.children.iter().map(|c| derivable_names(c, g)).collect();
    let mut out = BTreeSet::new();
    for name in &g.names {
        if mu(name) == t.label && g.rules[name].nfa().accepts_set_word(&child_sets) {
            out.insert(name.clone());
        }
    }
    out
}

/// Unique witness of a tree under a single-type grammar, found top-down:
/// the parent's name determines each child's name by its label alone.
pub fn witness(t: &UTree, g: &Grammar) -> Result<Option<UTree>> {
    if !g.is_single_type() {
        return Err(Error::Unsupported(
            "witness requires a single-type grammar".into(),
        ));
    }
    if mu(&g.root) != t.label {
        return Ok(None);
    }
    Ok(assign(t, &g.root, g))
}

fn assign(t: &UTree, name: &str, g: &Grammar) -> Option<UTree> {
    let model = g.rules.get(name)?;
    let occurring = model.symbols();
    let mut child_names = Vec::new();
    for c in &t.children {
        // single-type: at most one occurring name per element label
        let n = occurring.iter().find(|o| mu(o) == c.label)?;
        child_names.push(n.clone());
    }
    if !model.nfa().accepts(&child_names) {
        return None;
    }
    let mut children = Vec::new();
    for (c, n) in t.children.iter().zip(&child_names) {
        children.push(assign(c, n, g)?);
    }
    Some(UTree {
        label: name.to_string(),
        children,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::load_schema;
    use crate::Caps;

    fn t(s: &str) -> UTree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn parse_and_print() {
        let tree = t("s0(a, @f1, b(@f2))");
        assert_eq!(tree.to_string(), "s0(a, @f1, b(@f2))");
        assert_eq!(t("s0(a @f1 b(@f2))"), tree);
        assert_eq!(t("a"), UTree::leaf("a"));
        assert_eq!(t(&tree.to_string()), tree);
        assert!(parse_tree("a(b").is_err());
        assert!(parse_tree("a) ").is_err());
    }

    #[test]
    fn kernel_invariants() {
        let k = parse_kernel("s0(a, @f1, b(@f2))").unwrap();
        assert_eq!(k.functions, vec!["@f1".to_string(), "@f2".to_string()]);
        assert!(matches!(
            parse_kernel("s(@f, @f)"),
            Err(Error::DuplicateFunction(_))
        ));
        assert!(matches!(
            parse_kernel("s(@f(a))"),
            Err(Error::FunctionNotLeaf(_))
        ));
        assert!(matches!(parse_kernel("@f"), Err(Error::FunctionRoot(_))));
        // document order regardless of chosen names
        let k = parse_kernel("s(x(@g), @a, y(@m, z(@b)))").unwrap();
        assert_eq!(k.functions, vec!["@g", "@a", "@m", "@b"]);
    }

    #[test]
    fn materialization() {
        let k = parse_kernel("s(a, @f1, b(@f2))").unwrap();
        let mut e = Extension::default();
        e.assignment.insert("@f1".into(), t("s1(c(d, d))"));
        e.assignment.insert("@f2".into(), t("s2(d(e, f))"));
        let m = materialize(&k, &e).unwrap();
        assert_eq!(m, t("s(a, c(d, d), b(d(e, f)))"));
        // node count: ||k|| - n + sum(||t_i|| - 1)
        assert_eq!(
            m.size(),
            k.tree.size() - 2 + (t("s1(c(d, d))").size() - 1) + (t("s2(d(e, f))").size() - 1)
        );

        // childless assigned root: docking point vanishes
        let k = parse_kernel("s(a, @f1)").unwrap();
        let mut e = Extension::default();
        e.assignment.insert("@f1".into(), t("s1"));
        assert_eq!(materialize(&k, &e).unwrap(), t("s(a)"));

        // no docking points: identity
        let k = parse_kernel("s(a, b(c))").unwrap();
        assert_eq!(materialize(&k, &Extension::default()).unwrap(), k.tree);

        // missing assignment
        let k = parse_kernel("s(@f1)").unwrap();
        assert!(matches!(
            materialize(&k, &Extension::default()),
            Err(Error::MissingAssignment(_))
        ));
    }

    #[test]
    fn kernel_strings() {
        let k = parse_kernel("s0(a, @f1, c, @f2)").unwrap();
        assert_eq!(
            KernelDoc::kernel_string(&k.tree),
            vec!["a", "@f1", "c", "@f2"]
        );
        let k = parse_kernel("s(@f1, @f2)").unwrap();
        assert_eq!(KernelDoc::kernel_string(&k.tree), vec!["@f1", "@f2"]);
    }

    #[test]
    fn dtd_validation() {
        let caps = Caps::default();
        let g = load_schema(
            "class: dtd\nmechanism: dre\nroot: eurostat\n\
             eurostat -> averages, nationalIndex*\n\
             averages -> (Good, index+)+\n\
             nationalIndex -> country, Good, (index | value, year)\n\
             index -> value, year\n",
            &caps,
        )
        .unwrap();
        let ok = t("eurostat(averages(Good, index(value, year)), \
                    nationalIndex(country, Good, index(value, year)), \
                    nationalIndex(country, Good, value, year))");
        assert!(validate(&ok, &g));
        let bad = t("eurostat(averages(Good, index(value)), \
                     nationalIndex(country, Good, value, year))");
        assert!(!validate(&bad, &g));
        assert!(!validate(&t("averages(Good, index(value, year))"), &g));
        // single node against an epsilon rule
        let g = load_schema("class: dtd\nmechanism: dre\nroot: s\n", &caps).unwrap();
        assert!(validate(&t("s"), &g));
        assert!(!validate(&t("s(s)"), &g));
    }

    #[test]
    fn specialized_validation_and_witness() {
        let caps = Caps::default();
        // two specializations of nationalIndex under one root
        let g = load_schema(
            "class: edtd\nmechanism: dre\nroot: eurostat\n\
             eurostat -> averages, (nationalIndex#A* | nationalIndex#B*)\n\
             averages -> (Good, index+)+\n\
             nationalIndex#A -> country, Good, index\n\
             nationalIndex#B -> country, Good, value, year\n\
             index -> value, year\n",
            &caps,
        )
        .unwrap();
        let a_only = t("eurostat(averages(Good, index(value, year)), \
                        nationalIndex(country, Good, index(value, year)), \
                        nationalIndex(country, Good, index(value, year)))");
        let b_only = t("eurostat(averages(Good, index(value, year)), \
                        nationalIndex(country, Good, value, year))");
        let mixed = t("eurostat(averages(Good, index(value, year)), \
                       nationalIndex(country, Good, index(value, year)), \
                       nationalIndex(country, Good, value, year))");
        assert!(validate(&a_only, &g));
        assert!(validate(&b_only, &g));
        assert!(!validate(&mixed, &g));

        // single-type variant: alternation inside one nationalIndex name
        let st = load_schema(
            "class: sdtd\nmechanism: dre\nroot: eurostat\n\
             eurostat -> averages, nationalIndex#A, nationalIndex#A*\n\
             averages -> (Good, index+)+\n\
             nationalIndex#A -> country, Good, (index | value, year)\n\
             index -> value, year\n",
            &caps,
        )
        .unwrap();
        assert!(st.is_single_type());
        let w = witness(&mixed, &st).unwrap().unwrap();
        assert_eq!(w.map_labels(&|l| mu(l).to_string()), mixed);
        assert_eq!(w.label, "eurostat");
        assert_eq!(w.children[1].label, "nationalIndex#A");
        assert!(witness(&t("eurostat(averages(Good))"), &st)
            .unwrap()
            .is_none());

        // validation matches witness existence
        for tree in [&a_only, &b_only, &mixed] {
            assert_eq!(validate(tree, &st), witness(tree, &st).unwrap().is_some());
        }
    }
}

//! Grammar-level tooling: equivalence with counterexamples, and the
//! normal form in which distinct specializations of one element name have
//! disjoint subtree languages.

use dxd::schema::{
    equivalent_grammar, grammar_difference_witness, load_schema, normalize, print_schema,
};
use dxd::Caps;

fn main() -> dxd::Result<()> {
    let caps = Caps::default();

    // same language, different spellings
    let g1 = load_schema("class: dtd\nroot: s\ns -> a, a*\n", &caps)?;
    let g2 = load_schema("class: dtd\nroot: s\ns -> a+\n", &caps)?;
    println!("a,a* vs a+ equivalent: {}", equivalent_grammar(&g1, &g2, &caps)?);

    let g3 = load_schema("class: dtd\nroot: s\ns -> a?\n", &caps)?;
    if let Some(t) = grammar_difference_witness(&g2, &g3, &caps)? {
        println!("a+ vs a? separated by: {t}");
    }

    // the two specializations of `a` overlap on the childless tree a();
    // normalization splits that overlap into a third name
    let overlapping = load_schema(
        "class: edtd\n\
         mechanism: nfa\n\
         root: s\n\
         s -> a#1, a#2\n\
         a#1 -> b*\n\
         a#2 -> c?\n",
        &caps,
    )?;
    let norm = normalize(&overlapping, &caps)?;
    println!("\nnormalized form:\n{}", print_schema(&norm, &caps)?);
    println!("still the same language: {}", equivalent_grammar(&overlapping, &norm, &caps)?);
    Ok(())
}

//! Type the docking points of a tree kernel against a specialized grammar.
//! The same element name carries different content depending on position,
//! so the search guesses which specializations each kernel node may take
//! and solves one word problem per node.

use dxd::document::parse_kernel;
use dxd::schema::{load_schema, print_schema};
use dxd::tree_typing::{all_maximal_tree, exists_tree, induced_kappa, Property, TreeDesign};
use dxd::Caps;

fn main() -> dxd::Result<()> {
    let caps = Caps::default();
    let target = load_schema(
        "class: edtd\n\
         mechanism: nfa\n\
         root: s0\n\
         s0 -> (a#1, a#2)+\n\
         a#1 -> b\n\
         a#2 -> c\n",
        &caps,
    )?;
    let kernel = parse_kernel("s0(@f1, a(@f2), @f3)")?;
    let d = TreeDesign::new(target, kernel)?;

    // the concrete `a` node can play either specialization, and each choice
    // forces a different typing of the three holes
    for (i, typing) in all_maximal_tree(&d, &caps)?.iter().enumerate() {
        println!("maximal local typing {}:", i + 1);
        for (f, g) in d.kernel.functions.iter().zip(typing) {
            println!("-- {f}");
            print!("{}", print_schema(g, &caps)?);
        }
        let kappa = induced_kappa(&d, typing, &caps)?;
        println!("specializations used: {kappa}\n");
    }

    // both choices exclude each other, so no typing dominates everything
    assert!(exists_tree(&d, Property::Perfect, &caps)?.is_none());
    println!("no perfect typing for this design");
    Ok(())
}

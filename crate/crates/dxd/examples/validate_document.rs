//! Validate complete documents against a grammar and show what failed.

use dxd::document::{parse_tree, validate, witness};
use dxd::schema::load_schema;
use dxd::Caps;

fn main() -> dxd::Result<()> {
    let caps = Caps::default();
    let grammar = load_schema(
        "class: sdtd\n\
         mechanism: nfa\n\
         root: report\n\
         report -> section+, appendix?\n\
         section -> title, para*\n\
         appendix -> para+\n\
         title ->\n\
         para ->\n",
        &caps,
    )?;

    let good = parse_tree("report(section(title, para, para), appendix(para))")?;
    let bad = parse_tree("report(appendix(para), section(title))")?;

    for tree in [&good, &bad] {
        let ok = validate(tree, &grammar);
        println!("{tree}  ->  {}", if ok { "valid" } else { "invalid" });
        if ok {
            // the witness relabels each node with the grammar name it matched
            if let Some(w) = witness(tree, &grammar)? {
                println!("  matched as {w}");
            }
        }
    }
    Ok(())
}

//! Given a kernel with typed docking points, synthesize the one grammar
//! describing every possible materialization, and check that the result
//! stays inside the declared grammar class.

use dxd::bottom_up::{cons, synthesize_type, BottomUpDesign};
use dxd::document::parse_kernel;
use dxd::schema::{load_schema, print_schema, GrammarClass, Mechanism};
use dxd::Caps;

fn main() -> dxd::Result<()> {
    let caps = Caps::default();
    let kernel = parse_kernel("s0(a, @f1, c, @f2)")?;
    let typing = vec![
        load_schema("class: dtd\nmechanism: nre\nroot: s_f1\ns_f1 -> b*\n", &caps)?,
        load_schema("class: dtd\nmechanism: nre\nroot: s_f2\ns_f2 -> d*\n", &caps)?,
    ];
    let design = BottomUpDesign {
        kernel,
        typing,
        class: GrammarClass::Dtd,
        mech: Mechanism::Nre,
    };

    println!("consistent: {}", cons(&design, &caps)?);
    if let Some(global) = synthesize_type(&design, &caps)? {
        println!("{}", print_schema(&global, &caps)?);
    }
    Ok(())
}

//! Search a word design for perfect and maximal local typings. A typing is
//! local when the filled-in words are exactly the target language; perfect
//! when it also dominates every sound typing slot by slot.

use dxd::regex::{nfa_to_regex, parse_regex, print_regex, to_nfa};
use dxd::word_typing::{all_maximal_local, exists_perfect, parse_kernel_word, WordDesign};
use dxd::{Caps, Result};

fn show(slots: &[dxd::automata::Nfa], caps: &Caps) -> Result<String> {
    let parts: Vec<String> = slots
        .iter()
        .map(|a| Ok(print_regex(&nfa_to_regex(a, caps)?)))
        .collect::<Result<_>>()?;
    Ok(format!("({})", parts.join(" ; ")))
}

fn main() -> Result<()> {
    let caps = Caps::default();
    let target = to_nfa(&parse_regex("a*, b, c*", &caps)?);

    // the fixed `b` pins the split point, so one typing beats all others
    let anchored = WordDesign {
        target: target.clone(),
        kernel: parse_kernel_word("@f1 b @f2")?,
    };
    match exists_perfect(&anchored, &caps)? {
        Some(t) => println!("@f1 b @f2 has the perfect typing {}", show(&t, &caps)?),
        None => println!("@f1 b @f2 has no perfect typing"),
    }

    // without the anchor the `b` must come from one of the two holes, and
    // the two ways of choosing are incomparable
    let open = WordDesign {
        target,
        kernel: parse_kernel_word("@f1 @f2")?,
    };
    match exists_perfect(&open, &caps)? {
        Some(t) => println!("@f1 @f2 has the perfect typing {}", show(&t, &caps)?),
        None => println!("@f1 @f2 has no perfect typing"),
    }
    for typing in all_maximal_local(&open, &caps)? {
        println!("  maximal local: {}", show(&typing, &caps)?);
    }
    Ok(())
}

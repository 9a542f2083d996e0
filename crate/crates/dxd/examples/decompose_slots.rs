//! Look inside the candidate construction for a word design: the per-slot
//! fill automata, the slot unions, and their disjoint decomposition into
//! cells. Maximal local typings are exactly unions of whole cells, which is
//! what makes the search finite.

use dxd::regex::{nfa_to_regex, parse_regex, print_regex, to_nfa};
use dxd::word_typing::{
    build_perfect, compatible, decompose, omega_typing, parse_kernel_word, w_tau,
};
use dxd::{automata::Nfa, Caps, Result};

fn text(a: &Nfa, caps: &Caps) -> String {
    nfa_to_regex(a, caps)
        .map(|r| print_regex(&r))
        .unwrap_or_else(|_| "<big>".to_string())
}

fn main() -> Result<()> {
    let caps = Caps::default();
    let target = to_nfa(&parse_regex("a, (b, c)*, d", &caps)?);
    let kernel = parse_kernel_word("a @f1 @f2 d")?;

    let p = build_perfect(&target, &kernel, &caps)?;
    println!("compatible: {}", compatible(&p));

    let omega = omega_typing(&p)?;
    for (i, slot) in omega.iter().enumerate() {
        println!("slot {}: union {}", i + 1, text(slot, &caps));
        for (j, cell) in decompose(&p, i, &caps)?.iter().enumerate() {
            println!("  cell {}: {}", j + 1, text(cell, &caps));
        }
    }

    // the candidate over-approximates here: it accepts a word outside the
    // target, so no perfect typing exists for this kernel
    let filled = w_tau(&kernel, &omega, &caps)?;
    if let Some(w) = Nfa::counterexample_equivalent(&filled, &target, &caps)? {
        println!("candidate accepts stray word: {}", w.join(" "));
    }
    Ok(())
}

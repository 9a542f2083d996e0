//! Content strings with typed holes and the decision problems over their
//! slot typings: does a vector of fill languages stay inside the target
//! (sound), produce all of it (complete), and can it be grown or even made
//! canonical (maximal, perfect)?
//!
//! The engine is the slot-automaton construction: take the canonical DFA of
//! the target, cut it at the states that delimit the fixed kernel parts, and
//! collect per hole the local automata between those cut points. Everything
//! else (locality checks, maximality via decomposition cells, the searches)
//! is built on top of those pieces.

use crate::automata::{canonical_dfa, BoxLang, ComposeOp, Nfa, StateId};
use crate::{is_function_symbol, Caps, Error, Result, Symbol};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// A content string with typed holes: fixed segments `w0 .. wn` interleaved
/// with distinct function symbols, as in `a @f1 c @f2 e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelWord {
    segments: Vec<Vec<Symbol>>,
    functions: Vec<Symbol>,
}

impl KernelWord {
    pub fn new(segments: Vec<Vec<Symbol>>, functions: Vec<Symbol>) -> Result<KernelWord> {
        if segments.len() != functions.len() + 1 {
            return Err(Error::Arity {
                expected: functions.len() + 1,
                got: segments.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for f in &functions {
            if !is_function_symbol(f) {
                return Err(Error::Unsupported(format!("`{f}` is not a function symbol")));
            }
            if !seen.insert(f.clone()) {
                return Err(Error::DuplicateFunction(f.clone()));
            }
        }
        for s in segments.iter().flatten() {
            if is_function_symbol(s) {
                return Err(Error::Unsupported(format!(
                    "function symbol `{s}` inside a fixed segment"
                )));
            }
        }
        Ok(KernelWord { segments, functions })
    }

    /// Number of holes.
    pub fn n(&self) -> usize {
        self.functions.len()
    }

    pub fn segments(&self) -> &[Vec<Symbol>] {
        &self.segments
    }

    pub fn functions(&self) -> &[Symbol] {
        &self.functions
    }

    /// The same kernel with each segment as a fixed-width box of singleton
    /// cells.
    pub fn to_box(&self) -> KernelBox {
        let boxes = self
            .segments
            .iter()
            .map(|w| {
                BoxLang::new(w.iter().map(|s| BTreeSet::from([s.clone()])).collect())
                    .expect("singleton cells are never empty")
            })
            .collect();
        KernelBox {
            boxes,
            functions: self.functions.clone(),
        }
    }
}

impl fmt::Display for KernelWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            parts.extend(seg.iter().cloned());
            if i < self.functions.len() {
                parts.push(self.functions[i].clone());
            }
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// Kernel whose fixed parts are only partially known: each part is a
/// fixed-width set of strings (a box) instead of a single word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelBox {
    boxes: Vec<BoxLang>,
    functions: Vec<Symbol>,
}

impl KernelBox {
    pub fn new(boxes: Vec<BoxLang>, functions: Vec<Symbol>) -> Result<KernelBox> {
        if boxes.len() != functions.len() + 1 {
            return Err(Error::Arity {
                expected: functions.len() + 1,
                got: boxes.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for f in &functions {
            if !is_function_symbol(f) {
                return Err(Error::Unsupported(format!("`{f}` is not a function symbol")));
            }
            if !seen.insert(f.clone()) {
                return Err(Error::DuplicateFunction(f.clone()));
            }
        }
        for s in boxes.iter().flat_map(|b| b.symbols()) {
            if is_function_symbol(&s) {
                return Err(Error::Unsupported(format!(
                    "function symbol `{s}` inside a box cell"
                )));
            }
        }
        Ok(KernelBox { boxes, functions })
    }

    pub fn n(&self) -> usize {
        self.functions.len()
    }

    pub fn boxes(&self) -> &[BoxLang] {
        &self.boxes
    }

    pub fn functions(&self) -> &[Symbol] {
        &self.functions
    }
}

impl fmt::Display for KernelBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for (i, b) in self.boxes.iter().enumerate() {
            let cells: String = b
                .cells()
                .iter()
                .map(|c| format!("{{{}}}", c.iter().cloned().collect::<Vec<_>>().join(",")))
                .collect();
            if !cells.is_empty() {
                parts.push(cells);
            }
            if i < self.functions.len() {
                parts.push(self.functions[i].clone());
            }
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// Parse `a @f1 c @f2 e`: whitespace-separated symbols where `@`-prefixed
/// tokens are the holes.
pub fn parse_kernel_word(text: &str) -> Result<KernelWord> {
    let mut segments = vec![Vec::new()];
    let mut functions = Vec::new();
    for tok in text.split_whitespace() {
        if tok.starts_with('@') {
            functions.push(tok.to_string());
            segments.push(Vec::new());
        } else {
            segments.last_mut().unwrap().push(tok.to_string());
        }
    }
    KernelWord::new(segments, functions)
}

/// Parse `{a,b}{c} @f1 {d}`: each `{..}` is one fixed position offering a
/// set of symbols, adjacent positions form one box, `@` tokens are the
/// holes. An absent group between holes is the width-zero box.
pub fn parse_kernel_box(text: &str) -> Result<KernelBox> {
    let chars: Vec<char> = text.chars().collect();
    let mut boxes = Vec::new();
    let mut functions = Vec::new();
    let mut cells: Vec<BTreeSet<Symbol>> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '{' {
            let close = chars[i + 1..]
                .iter()
                .position(|&c| c == '}')
                .ok_or(Error::Syntax {
                    pos: i,
                    msg: "unclosed `{` in box kernel".into(),
                })?;
            let inner: String = chars[i + 1..i + 1 + close].iter().collect();
            let mut cell = BTreeSet::new();
            for part in inner.split(',') {
                let sym = part.trim();
                if sym.is_empty() {
                    return Err(Error::Syntax {
                        pos: i,
                        msg: "empty symbol in a box cell".into(),
                    });
                }
                cell.insert(sym.to_string());
            }
            cells.push(cell);
            i += close + 2;
        } else if c == '@' {
            let end = chars[i..]
                .iter()
                .position(|c| c.is_whitespace() || *c == '{')
                .map(|p| i + p)
                .unwrap_or(chars.len());
            functions.push(chars[i..end].iter().collect());
            boxes.push(BoxLang::new(std::mem::take(&mut cells))?);
            i = end;
        } else {
            return Err(Error::Syntax {
                pos: i,
                msg: format!("unexpected `{c}` in box kernel"),
            });
        }
    }
    boxes.push(BoxLang::new(cells)?);
    KernelBox::new(boxes, functions)
}

/// A design problem at the string level: target content language plus the
/// kernel to complete.
#[derive(Clone, Debug)]
pub struct WordDesign {
    pub target: Nfa,
    pub kernel: KernelWord,
}

/// Box variant of [`WordDesign`].
#[derive(Clone, Debug)]
pub struct BoxDesign {
    pub target: Nfa,
    pub kernel: KernelBox,
}

/// One fill automaton between two states of the canonical target.
#[derive(Clone, Debug)]
pub struct Piece {
    pub entry: StateId,
    pub exit: StateId,
    pub lang: Nfa,
}

/// The slot-automaton construction over a design: per-hole legal fill
/// automata, per-segment instance automata, and the glued composite whose
/// language is exactly the materializations lying inside the target.
#[derive(Clone, Debug)]
pub struct PerfectAutomaton {
    /// Canonical minimal DFA of the target, trimmed.
    pub target: Nfa,
    boxes: Vec<BoxLang>,
    functions: Vec<Symbol>,
    segment_pieces: Vec<Vec<Piece>>,
    slot_pieces: Vec<Vec<Piece>>,
    /// All surviving pieces glued in kernel order.
    pub composite: Nfa,
}

impl PerfectAutomaton {
    pub fn n(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> &[Symbol] {
        &self.functions
    }

    pub fn boxes(&self) -> &[BoxLang] {
        &self.boxes
    }

    /// The legal fill automata for hole `i` (0-based).
    pub fn slot_automata(&self, i: usize) -> &[Piece] {
        &self.slot_pieces[i]
    }

    /// The surviving instances of fixed part `i` (0-based, `n + 1` layers).
    pub fn segment_instances(&self, i: usize) -> &[Piece] {
        &self.segment_pieces[i]
    }
}

pub fn build_perfect(target: &Nfa, kernel: &KernelWord, caps: &Caps) -> Result<PerfectAutomaton> {
    let kb = kernel.to_box();
    build_core(target, &kb.boxes, &kb.functions, caps)
}

pub fn build_perfect_box(
    target: &Nfa,
    kernel: &KernelBox,
    caps: &Caps,
) -> Result<PerfectAutomaton> {
    build_core(target, &kernel.boxes, &kernel.functions, caps)
}

/// `{v in B : entry -v-> exit}` inside the canonical target.
fn box_instance(a: &Nfa, b: &BoxLang, entry: StateId, exit: StateId, caps: &Caps) -> Result<Nfa> {
    Nfa::compose(ComposeOp::Intersect, &b.to_nfa(), &a.local_automaton(entry, exit), caps)
}

fn build_core(
    target: &Nfa,
    boxes: &[BoxLang],
    functions: &[Symbol],
    caps: &Caps,
) -> Result<PerfectAutomaton> {
    if target.alphabet.iter().any(|s| is_function_symbol(s)) {
        return Err(Error::Unsupported(
            "target alphabet contains function symbols".into(),
        ));
    }
    let n = functions.len();
    let a = canonical_dfa(target, caps)?.into_nfa().trim();

    // Candidate instances of each fixed part: endpoint pairs of the part
    // inside the canonical DFA. The first layer must start at the initial
    // state, the last must end in a final one.
    let mut segment_pieces: Vec<Vec<Piece>> = Vec::with_capacity(n + 1);
    for (i, b) in boxes.iter().enumerate() {
        let mut layer = Vec::new();
        for (q, q2) in a.box_pairs(b) {
            if i == 0 && q != a.initial {
                continue;
            }
            if i == n && !a.finals.contains(&q2) {
                continue;
            }
            layer.push(Piece {
                entry: q,
                exit: q2,
                lang: box_instance(&a, b, q, q2, caps)?,
            });
        }
        segment_pieces.push(layer);
    }

    // Candidate fills for hole i: local automata between any end of part
    // i-1 and any start of part i.
    let mut slot_pieces: Vec<Vec<Piece>> = Vec::with_capacity(n);
    for i in 1..=n {
        let (_, fin_prev) = a.box_delimiters(&boxes[i - 1]);
        let (ini_next, _) = a.box_delimiters(&boxes[i]);
        let mut layer = Vec::new();
        for &q in &fin_prev {
            for &q2 in &ini_next {
                layer.push(Piece {
                    entry: q,
                    exit: q2,
                    lang: a.local_automaton(q, q2),
                });
            }
        }
        slot_pieces.push(layer);
    }

    // Glue candidates in kernel order, keep only pieces on a live chain
    // from the initial layer to an accepting one, then reglue the survivors.
    let glued = glue(&a, &segment_pieces, &slot_pieces, caps)?;
    let (keep_seg, keep_slot) = live_pieces(&glued);
    let segment_pieces = filter_layers(segment_pieces, &keep_seg);
    let slot_pieces = filter_layers(slot_pieces, &keep_slot);
    let glued = glue(&a, &segment_pieces, &slot_pieces, caps)?;
    let composite = glued.nfa.trim();

    Ok(PerfectAutomaton {
        target: a,
        boxes: boxes.to_vec(),
        functions: functions.to_vec(),
        segment_pieces,
        slot_pieces,
        composite,
    })
}

struct Glued {
    nfa: Nfa,
    seg_pos: Vec<Vec<(StateId, Vec<StateId>)>>,
    slot_pos: Vec<Vec<(StateId, Vec<StateId>)>>,
}

fn place_layer(nfa: &mut Nfa, layer: &[Piece]) -> Vec<(StateId, Vec<StateId>)> {
    layer
        .iter()
        .map(|p| {
            let off = nfa.append_states(&p.lang);
            (
                off + p.lang.initial,
                p.lang.finals.iter().map(|f| off + f).collect(),
            )
        })
        .collect()
}

/// Disjoint copies of every piece plus epsilon wiring between consecutive
/// layers wherever the endpoint states agree.
fn glue(a: &Nfa, seg: &[Vec<Piece>], slots: &[Vec<Piece>], caps: &Caps) -> Result<Glued> {
    let mut alphabet = a.alphabet.clone();
    for p in seg.iter().chain(slots).flatten() {
        alphabet.extend(p.lang.alphabet.iter().cloned());
    }
    let mut nfa = Nfa {
        alphabet,
        labels: vec!["glue".into()],
        initial: 0,
        finals: BTreeSet::new(),
        transitions: BTreeSet::new(),
    };
    let mut seg_pos = Vec::with_capacity(seg.len());
    for layer in seg {
        seg_pos.push(place_layer(&mut nfa, layer));
    }
    let mut slot_pos = Vec::with_capacity(slots.len());
    for layer in slots {
        slot_pos.push(place_layer(&mut nfa, layer));
    }
    if nfa.n_states() > caps.max_det_states {
        return Err(Error::ResourceCap(format!(
            "glued slot construction needs {} states (cap {})",
            nfa.n_states(),
            caps.max_det_states
        )));
    }
    for pos in &seg_pos[0] {
        nfa.transitions.insert((0, None, pos.0));
    }
    let n = slots.len();
    for i in 0..n {
        for (js, sp) in seg[i].iter().enumerate() {
            for (jx, xp) in slots[i].iter().enumerate() {
                if xp.entry == sp.exit {
                    for &f in &seg_pos[i][js].1 {
                        nfa.transitions.insert((f, None, slot_pos[i][jx].0));
                    }
                }
            }
        }
        for (jx, xp) in slots[i].iter().enumerate() {
            for (js, sp) in seg[i + 1].iter().enumerate() {
                if sp.entry == xp.exit {
                    for &f in &slot_pos[i][jx].1 {
                        nfa.transitions.insert((f, None, seg_pos[i + 1][js].0));
                    }
                }
            }
        }
    }
    nfa.finals = seg_pos[n]
        .iter()
        .flat_map(|(_, fs)| fs.iter().copied())
        .collect();
    Ok(Glued { nfa, seg_pos, slot_pos })
}

fn reach(nfa: &Nfa, backward: bool) -> BTreeSet<StateId> {
    let mut seen: BTreeSet<StateId> = if backward {
        nfa.finals.clone()
    } else {
        BTreeSet::from([nfa.initial])
    };
    let mut queue: VecDeque<StateId> = seen.iter().copied().collect();
    while let Some(q) = queue.pop_front() {
        for (f, _, t) in &nfa.transitions {
            let (src, dst) = if backward { (*t, *f) } else { (*f, *t) };
            if src == q && seen.insert(dst) {
                queue.push_back(dst);
            }
        }
    }
    seen
}

/// A piece is live exactly when one of its accepting states lies on a path
/// from the glued initial state to a glued final one; copies are disjoint
/// and only enterable through their own initial state, so this is precise.
fn live_pieces(g: &Glued) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    let fwd = reach(&g.nfa, false);
    let bwd = reach(&g.nfa, true);
    let keep = |pos: &[(StateId, Vec<StateId>)]| -> Vec<bool> {
        pos.iter()
            .map(|(_, fs)| fs.iter().any(|f| fwd.contains(f) && bwd.contains(f)))
            .collect()
    };
    (
        g.seg_pos.iter().map(|l| keep(l)).collect(),
        g.slot_pos.iter().map(|l| keep(l)).collect(),
    )
}

fn filter_layers(layers: Vec<Vec<Piece>>, keep: &[Vec<bool>]) -> Vec<Vec<Piece>> {
    layers
        .into_iter()
        .zip(keep)
        .map(|(layer, k)| {
            layer
                .into_iter()
                .zip(k)
                .filter(|(_, keep)| **keep)
                .map(|(p, _)| p)
                .collect()
        })
        .collect()
}

/// Some choice of fixed parts and fills lies in the target.
pub fn compatible(p: &PerfectAutomaton) -> bool {
    !p.composite.is_empty_lang()
}

/// The per-hole unions of all legal fill automata: the largest sound typing
/// candidate, and the only one that can be perfect.
pub fn omega_typing(p: &PerfectAutomaton) -> Result<Vec<Nfa>> {
    if !compatible(p) {
        return Err(Error::Incompatible(
            "kernel admits no completion inside the target".into(),
        ));
    }
    Ok(p.slot_pieces
        .iter()
        .map(|layer| {
            let parts: Vec<Nfa> = layer.iter().map(|pc| pc.lang.clone()).collect();
            Nfa::union_many(&parts, p.target.alphabet.clone())
        })
        .collect())
}

/// The materialization language `w0 t1 w1 .. tn wn` of a typing.
pub fn w_tau(kernel: &KernelWord, typing: &[Nfa], caps: &Caps) -> Result<Nfa> {
    b_tau_over(&kernel.to_box().boxes, typing, caps)
}

/// Box variant of [`w_tau`].
pub fn b_tau(kernel: &KernelBox, typing: &[Nfa], caps: &Caps) -> Result<Nfa> {
    b_tau_over(&kernel.boxes, typing, caps)
}

fn b_tau_over(boxes: &[BoxLang], typing: &[Nfa], caps: &Caps) -> Result<Nfa> {
    if typing.len() + 1 != boxes.len() {
        return Err(Error::Arity {
            expected: boxes.len() - 1,
            got: typing.len(),
        });
    }
    let mut acc = boxes[0].to_nfa();
    for (t, b) in typing.iter().zip(&boxes[1..]) {
        acc = Nfa::compose(ComposeOp::Concat, &acc, t, caps)?;
        acc = Nfa::compose(ComposeOp::Concat, &acc, &b.to_nfa(), caps)?;
    }
    Ok(acc)
}

/// A fill language counts only when it offers some nonempty string; the
/// languages `{}` and `{epsilon}` are excluded from every slot. After
/// epsilon elimination and trimming, any remaining transition lies on an
/// accepting path, so one suffices.
pub fn is_admissible(a: &Nfa) -> bool {
    let t = a.epsilon_free().trim();
    !t.finals.is_empty() && !t.transitions.is_empty()
}

pub fn check_local(d: &WordDesign, typing: &[Nfa], caps: &Caps) -> Result<bool> {
    local_over(&d.target, &d.kernel.to_box().boxes, typing, caps)
}

pub fn check_local_box(d: &BoxDesign, typing: &[Nfa], caps: &Caps) -> Result<bool> {
    local_over(&d.target, &d.kernel.boxes, typing, caps)
}

/// Local = admissible everywhere and materializing to exactly the target.
fn local_over(target: &Nfa, boxes: &[BoxLang], typing: &[Nfa], caps: &Caps) -> Result<bool> {
    if typing.len() + 1 != boxes.len() {
        return Err(Error::Arity {
            expected: boxes.len() - 1,
            got: typing.len(),
        });
    }
    if !typing.iter().all(is_admissible) {
        return Ok(false);
    }
    let w = b_tau_over(boxes, typing, caps)?;
    Nfa::equivalent(&w, target, caps)
}

pub fn check_maximal_local(d: &WordDesign, typing: &[Nfa], caps: &Caps) -> Result<bool> {
    let kb = d.kernel.to_box();
    check_ml_over(&d.target, &kb.boxes, &kb.functions, typing, caps)
}

pub fn check_maximal_local_box(d: &BoxDesign, typing: &[Nfa], caps: &Caps) -> Result<bool> {
    check_ml_over(&d.target, &d.kernel.boxes, &d.kernel.functions, typing, caps)
}

fn check_ml_over(
    target: &Nfa,
    boxes: &[BoxLang],
    functions: &[Symbol],
    typing: &[Nfa],
    caps: &Caps,
) -> Result<bool> {
    if !local_over(target, boxes, typing, caps)? {
        return Ok(false);
    }
    let p = build_core(target, boxes, functions, caps)?;
    let cells = all_cells(&p, caps)?;
    maximal_given_local(&p, &cells, typing, caps)
}

/// Assumes `typing` is local. A local typing is maximal iff no single
/// decomposition cell can be soundly added to some slot: a cell partially
/// covered by the slot is always soundly addable (words of one cell lie in
/// exactly the same fill automata, hence are interchangeable in any
/// materialization), a disjoint cell needs one inclusion test.
fn maximal_given_local(
    p: &PerfectAutomaton,
    cells: &[Vec<Nfa>],
    typing: &[Nfa],
    caps: &Caps,
) -> Result<bool> {
    for i in 0..typing.len() {
        for cell in &cells[i] {
            let outside = Nfa::compose(ComposeOp::Difference, cell, &typing[i], caps)?;
            if outside.is_empty_lang() {
                continue;
            }
            let inside = Nfa::compose(ComposeOp::Intersect, cell, &typing[i], caps)?;
            if !inside.is_empty_lang() {
                return Ok(false);
            }
            let mut ext = typing.to_vec();
            ext[i] = Nfa::compose(ComposeOp::Union, &typing[i], cell, caps)?;
            let w = b_tau_over(&p.boxes, &ext, caps)?;
            if Nfa::includes(&w, &p.target, caps)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The nonempty atoms of the boolean algebra spanned by hole `i`'s legal
/// fill automata, in subset-mask order: for every nonempty subset of the
/// automata, the strings lying in all chosen ones and in none of the
/// others. The cells are pairwise disjoint and union to the hole's full
/// fill language.
pub fn decompose(p: &PerfectAutomaton, slot: usize, caps: &Caps) -> Result<Vec<Nfa>> {
    let aut = &p.slot_pieces[slot];
    if aut.len() > caps.max_slot_automata {
        return Err(Error::ResourceCap(format!(
            "hole {} has {} legal fill automata (cap {})",
            slot,
            aut.len(),
            caps.max_slot_automata
        )));
    }
    let parts: Vec<Nfa> = aut.iter().map(|pc| pc.lang.clone()).collect();
    let omega_i = Nfa::union_many(&parts, p.target.alphabet.clone());
    let mut cells = Vec::new();
    for mask in 1u64..(1u64 << aut.len()) {
        let mut cell = omega_i.clone();
        for (j, pc) in aut.iter().enumerate() {
            let op = if mask >> j & 1 == 1 {
                ComposeOp::Intersect
            } else {
                ComposeOp::Difference
            };
            cell = Nfa::compose(op, &cell, &pc.lang, caps)?.trim();
        }
        if !cell.is_empty_lang() {
            cells.push(cell);
        }
    }
    Ok(cells)
}

fn all_cells(p: &PerfectAutomaton, caps: &Caps) -> Result<Vec<Vec<Nfa>>> {
    (0..p.slot_pieces.len()).map(|i| decompose(p, i, caps)).collect()
}

pub fn exists_perfect(d: &WordDesign, caps: &Caps) -> Result<Option<Vec<Nfa>>> {
    let kb = d.kernel.to_box();
    let p = build_core(&d.target, &kb.boxes, &kb.functions, caps)?;
    perfect_of(&p, caps)
}

pub fn exists_perfect_box(d: &BoxDesign, caps: &Caps) -> Result<Option<Vec<Nfa>>> {
    let p = build_core(&d.target, &d.kernel.boxes, &d.kernel.functions, caps)?;
    perfect_of(&p, caps)
}

/// The full typing is the one perfect candidate: it is perfect exactly when
/// it is admissible and itself local.
fn perfect_of(p: &PerfectAutomaton, caps: &Caps) -> Result<Option<Vec<Nfa>>> {
    if !compatible(p) {
        return Ok(None);
    }
    let omega = omega_typing(p)?;
    if !omega.iter().all(is_admissible) {
        return Ok(None);
    }
    let w = b_tau_over(&p.boxes, &omega, caps)?;
    Ok(if Nfa::equivalent(&w, &p.target, caps)? {
        Some(omega)
    } else {
        None
    })
}

pub fn check_perfect(d: &WordDesign, typing: &[Nfa], caps: &Caps) -> Result<bool> {
    if typing.len() != d.kernel.n() {
        return Err(Error::Arity {
            expected: d.kernel.n(),
            got: typing.len(),
        });
    }
    matches_candidate(exists_perfect(d, caps)?, typing, caps)
}

pub fn check_perfect_box(d: &BoxDesign, typing: &[Nfa], caps: &Caps) -> Result<bool> {
    if typing.len() != d.kernel.n() {
        return Err(Error::Arity {
            expected: d.kernel.n(),
            got: typing.len(),
        });
    }
    matches_candidate(exists_perfect_box(d, caps)?, typing, caps)
}

fn matches_candidate(
    candidate: Option<Vec<Nfa>>,
    typing: &[Nfa],
    caps: &Caps,
) -> Result<bool> {
    let Some(om) = candidate else {
        return Ok(false);
    };
    for (t, o) in typing.iter().zip(&om) {
        if !Nfa::equivalent(t, o, caps)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn exists_local(d: &WordDesign, caps: &Caps) -> Result<Option<Vec<Nfa>>> {
    let kb = d.kernel.to_box();
    let p = build_core(&d.target, &kb.boxes, &kb.functions, caps)?;
    search_vectors(&p, caps, |langs, _, _| {
        let w = b_tau_over(&p.boxes, langs, caps)?;
        Ok(if Nfa::equivalent(&w, &p.target, caps)? {
            Some(langs.to_vec())
        } else {
            None
        })
    })
}

pub fn exists_local_box(d: &BoxDesign, caps: &Caps) -> Result<Option<Vec<Nfa>>> {
    let p = build_core(&d.target, &d.kernel.boxes, &d.kernel.functions, caps)?;
    search_vectors(&p, caps, |langs, _, _| {
        let w = b_tau_over(&p.boxes, langs, caps)?;
        Ok(if Nfa::equivalent(&w, &p.target, caps)? {
            Some(langs.to_vec())
        } else {
            None
        })
    })
}

pub fn exists_maximal_local(d: &WordDesign, caps: &Caps) -> Result<Option<Vec<Nfa>>> {
    let kb = d.kernel.to_box();
    let p = build_core(&d.target, &kb.boxes, &kb.functions, caps)?;
    first_maximal(&p, caps)
}

pub fn exists_maximal_local_box(d: &BoxDesign, caps: &Caps) -> Result<Option<Vec<Nfa>>> {
    let p = build_core(&d.target, &d.kernel.boxes, &d.kernel.functions, caps)?;
    first_maximal(&p, caps)
}

fn first_maximal(p: &PerfectAutomaton, caps: &Caps) -> Result<Option<Vec<Nfa>>> {
    search_vectors(p, caps, |langs, _, cells| {
        let w = b_tau_over(&p.boxes, langs, caps)?;
        if !Nfa::equivalent(&w, &p.target, caps)? {
            return Ok(None);
        }
        if !maximal_given_local(p, cells, langs, caps)? {
            return Ok(None);
        }
        Ok(Some(langs.to_vec()))
    })
}

pub fn all_maximal_local(d: &WordDesign, caps: &Caps) -> Result<Vec<Vec<Nfa>>> {
    let kb = d.kernel.to_box();
    let p = build_core(&d.target, &kb.boxes, &kb.functions, caps)?;
    collect_maximal(&p, caps)
}

pub fn all_maximal_local_box(d: &BoxDesign, caps: &Caps) -> Result<Vec<Vec<Nfa>>> {
    let p = build_core(&d.target, &d.kernel.boxes, &d.kernel.functions, caps)?;
    collect_maximal(&p, caps)
}

fn collect_maximal(p: &PerfectAutomaton, caps: &Caps) -> Result<Vec<Vec<Nfa>>> {
    let mut found: Vec<Vec<Nfa>> = Vec::new();
    let nothing: Option<Vec<Nfa>> = search_vectors(p, caps, |langs, _, cells| {
        let w = b_tau_over(&p.boxes, langs, caps)?;
        if Nfa::equivalent(&w, &p.target, caps)?
            && maximal_given_local(p, cells, langs, caps)?
        {
            found.push(langs.to_vec());
        }
        Ok(None)
    })?;
    debug_assert!(nothing.is_none());
    Ok(found)
}

/// Enumerate candidate typings as per-slot unions of decomposition cells,
/// visiting vectors by descending total cell count with earlier slots
/// varying slowest, and report the first accepted one. Cell subsets whose
/// union offers no nonempty string are skipped.
fn search_vectors<R>(
    p: &PerfectAutomaton,
    caps: &Caps,
    mut visit: impl FnMut(&[Nfa], &[u64], &[Vec<Nfa>]) -> Result<Option<R>>,
) -> Result<Option<R>> {
    if !compatible(p) {
        return Ok(None);
    }
    let cells = all_cells(p, caps)?;
    let over_cap = || {
        Error::ResourceCap(format!(
            "cell-subset search space exceeds {} vectors",
            caps.max_subset_vectors
        ))
    };
    let mut count: u64 = 1;
    for cs in &cells {
        if cs.len() >= 63 {
            return Err(over_cap());
        }
        count = count
            .checked_mul((1u64 << cs.len()) - 1)
            .ok_or_else(over_cap)?;
    }
    if count > caps.max_subset_vectors {
        return Err(Error::ResourceCap(format!(
            "{count} candidate cell vectors (cap {})",
            caps.max_subset_vectors
        )));
    }
    let admissible: Vec<Vec<bool>> = cells
        .iter()
        .map(|cs| cs.iter().map(is_admissible).collect())
        .collect();
    let n = cells.len();
    let total_max: u32 = cells.iter().map(|c| c.len() as u32).sum();
    let mut unions: BTreeMap<(usize, u64), Nfa> = BTreeMap::new();
    let mut chosen: Vec<u64> = Vec::with_capacity(n);
    for total in (n as u32..=total_max).rev() {
        if let Some(r) = assign(
            p, caps, &cells, &admissible, &mut unions, total, &mut chosen, &mut visit,
        )? {
            return Ok(Some(r));
        }
        debug_assert!(chosen.is_empty());
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn assign<R>(
    p: &PerfectAutomaton,
    caps: &Caps,
    cells: &[Vec<Nfa>],
    admissible: &[Vec<bool>],
    unions: &mut BTreeMap<(usize, u64), Nfa>,
    remaining: u32,
    chosen: &mut Vec<u64>,
    visit: &mut impl FnMut(&[Nfa], &[u64], &[Vec<Nfa>]) -> Result<Option<R>>,
) -> Result<Option<R>> {
    let slot = chosen.len();
    if slot == cells.len() {
        if remaining != 0 {
            return Ok(None);
        }
        let langs: Vec<Nfa> = chosen
            .iter()
            .enumerate()
            .map(|(i, &m)| slot_union(p, cells, unions, i, m))
            .collect();
        return visit(&langs, chosen, cells);
    }
    let rest_min = (cells.len() - slot - 1) as u32;
    let rest_max: u32 = cells[slot + 1..].iter().map(|c| c.len() as u32).sum();
    for mask in 1u64..(1u64 << cells[slot].len()) {
        let pc = mask.count_ones();
        if pc + rest_min > remaining || pc + rest_max < remaining {
            continue;
        }
        if !(0..cells[slot].len()).any(|j| mask >> j & 1 == 1 && admissible[slot][j]) {
            continue;
        }
        chosen.push(mask);
        let r = assign(p, caps, cells, admissible, unions, remaining - pc, chosen, visit)?;
        chosen.pop();
        if r.is_some() {
            return Ok(r);
        }
    }
    Ok(None)
}

fn slot_union(
    p: &PerfectAutomaton,
    cells: &[Vec<Nfa>],
    unions: &mut BTreeMap<(usize, u64), Nfa>,
    slot: usize,
    mask: u64,
) -> Nfa {
    unions
        .entry((slot, mask))
        .or_insert_with(|| {
            let parts: Vec<Nfa> = cells[slot]
                .iter()
                .enumerate()
                .filter(|(j, _)| mask >> j & 1 == 1)
                .map(|(_, c)| c.clone())
                .collect();
            Nfa::union_many(&parts, p.target.alphabet.clone())
        })
        .clone()
}

/// All alternating chains of surviving pieces with agreeing endpoints, as
/// (segment indices, hole indices) per layer, in index order, at most
/// `limit` of them.
pub fn sequences(p: &PerfectAutomaton, limit: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    let mut segs = Vec::new();
    let mut slots = Vec::new();
    chain_rec(p, None, &mut segs, &mut slots, limit, &mut out);
    out
}

fn chain_rec(
    p: &PerfectAutomaton,
    prev_exit: Option<StateId>,
    segs: &mut Vec<usize>,
    slots: &mut Vec<usize>,
    limit: usize,
    out: &mut Vec<(Vec<usize>, Vec<usize>)>,
) {
    if out.len() >= limit {
        return;
    }
    let i = segs.len();
    let need = prev_exit.unwrap_or(p.target.initial);
    for (js, sp) in p.segment_pieces[i].iter().enumerate() {
        if sp.entry != need {
            continue;
        }
        segs.push(js);
        if i == p.slot_pieces.len() {
            out.push((segs.clone(), slots.clone()));
        } else {
            for (jx, xp) in p.slot_pieces[i].iter().enumerate() {
                if xp.entry != sp.exit {
                    continue;
                }
                slots.push(jx);
                chain_rec(p, Some(xp.exit), segs, slots, limit, out);
                slots.pop();
                if out.len() >= limit {
                    break;
                }
            }
        }
        segs.pop();
        if out.len() >= limit {
            return;
        }
    }
}

//! Command-line surface: parses files or inline text, runs the library
//! analyses, and prints verdicts. Every argument that names an input
//! (target, kernel, typing value) is read from disk when it is an existing
//! path and taken literally otherwise, so small designs fit on one line.
//!
//! Exit codes are a stable contract for scripting: 0 yes, 1 no,
//! 2 undecided under a resource cap, 3 bad input or inconsistent typing.

use crate::automata::Nfa;
use crate::bottom_up::{cons, realize_mechanism, synthesize_type, BottomUpDesign};
use crate::document::{derivable_names, parse_kernel, parse_tree, validate, UTree};
use crate::regex::{nfa_to_regex, parse_regex, print_regex, to_nfa};
use crate::schema::{load_schema, print_schema, Grammar, GrammarClass, Mechanism};
use crate::tree_typing::{all_maximal_tree, check_tree, exists_tree, Property, TreeDesign};
use crate::word_typing::{
    all_maximal_local, all_maximal_local_box, b_tau, build_perfect, build_perfect_box,
    check_local, check_local_box, check_maximal_local, check_maximal_local_box, check_perfect,
    check_perfect_box, compatible, exists_local, exists_local_box, exists_maximal_local,
    exists_maximal_local_box, exists_perfect, exists_perfect_box, omega_typing,
    parse_kernel_box, parse_kernel_word, w_tau, BoxDesign, WordDesign,
};
use crate::{Caps, Error, Result, Symbol};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Answer {
    #[serde(rename = "yes")]
    Yes,
    #[serde(rename = "no")]
    No,
    #[serde(rename = "undecided-resource-cap")]
    Undecided,
    #[serde(rename = "inconsistent-typing")]
    Inconsistent,
    #[serde(rename = "error")]
    Error,
}

impl Answer {
    pub fn exit_code(self) -> i32 {
        match self {
            Answer::Yes => 0,
            Answer::No => 1,
            Answer::Undecided => 2,
            Answer::Inconsistent | Answer::Error => 3,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Undecided => "undecided-resource-cap",
            Answer::Inconsistent => "inconsistent-typing",
            Answer::Error => "error",
        }
    }
}

/// One analysis result: the answer, any witness objects (typings, grammars)
/// keyed by name, and free-form diagnostics such as counterexamples.
#[derive(Debug, Serialize)]
pub struct Verdict {
    pub problem: String,
    pub answer: Answer,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub witness: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl Verdict {
    fn new(problem: &str, answer: Answer) -> Verdict {
        Verdict {
            problem: problem.to_string(),
            answer,
            witness: BTreeMap::new(),
            diagnostics: Vec::new(),
        }
    }

    fn of_bool(problem: &str, yes: bool) -> Verdict {
        Verdict::new(problem, if yes { Answer::Yes } else { Answer::No })
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("problem: {}\nanswer: {}\n", self.problem, self.answer.as_str());
        for (k, v) in &self.witness {
            if v.contains('\n') {
                out.push_str(&format!("{k}:\n"));
                for line in v.lines() {
                    out.push_str(&format!("  {line}\n"));
                }
            } else {
                out.push_str(&format!("{k}: {v}\n"));
            }
        }
        for d in &self.diagnostics {
            out.push_str(&format!("note: {d}\n"));
        }
        out
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "dxd",
    about = "Typing analysis for distributed documents",
    disable_help_subcommand = true
)]
struct Cli {
    /// Emit the verdict as JSON instead of plain text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check one complete document against a grammar
    Validate {
        /// Document tree, as a file or inline `label(child, ...)` text
        #[arg(long)]
        doc: String,
        /// Grammar, as a file or inline schema text
        #[arg(long)]
        target: String,
    },
    /// Decide whether a typed kernel's materializations fit the class
    Cons {
        #[arg(long)]
        kernel: String,
        /// Repeated `fN=<grammar>` bindings, one per docking point
        #[arg(long = "typing")]
        typing: Vec<String>,
        #[arg(long)]
        class: String,
        #[arg(long, default_value = "nfa")]
        mechanism: String,
    },
    /// Synthesize the global type of a typed kernel
    Synth {
        #[arg(long)]
        kernel: String,
        #[arg(long = "typing")]
        typing: Vec<String>,
        #[arg(long)]
        class: String,
        #[arg(long, default_value = "nfa")]
        mechanism: String,
        /// Write the synthesized grammar to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a given typing for a property (loc, ml, perf)
    Check {
        /// Grammar file for tree designs, regex for word/box designs
        #[arg(long)]
        target: String,
        /// Tree kernel such as `s(a, @f1)`
        #[arg(long)]
        kernel: Option<String>,
        /// Word kernel such as `a @f1 c @f2 e`
        #[arg(long)]
        word: Option<String>,
        /// Box kernel such as `{a,b} @f1 {c}`
        #[arg(long)]
        boxes: Option<String>,
        #[arg(long = "typing")]
        typing: Vec<String>,
        #[arg(long)]
        property: String,
    },
    /// Search for a typing with a property (loc, ml, perf)
    Find {
        #[arg(long)]
        target: String,
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        word: Option<String>,
        #[arg(long)]
        boxes: Option<String>,
        #[arg(long)]
        property: String,
        /// With `ml`, report every maximal local typing
        #[arg(long)]
        all: bool,
        /// Write witness typings into this directory, one file per slot
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
}

/// Entry point for the binary: full argv in, exit code out.
pub fn run(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let caps = match caps_from_env() {
        Ok(c) => c,
        Err(e) => {
            let mut v = Verdict::new("caps", Answer::Error);
            v.diagnostics.push(e.to_string());
            print_verdict(&v, cli.json);
            return v.answer.exit_code();
        }
    };
    let verdict = execute(&cli.cmd, &caps);
    print_verdict(&verdict, cli.json);
    verdict.answer.exit_code()
}

fn print_verdict(v: &Verdict, json: bool) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(v).expect("verdict serializes")
        );
    } else {
        print!("{}", v.render_text());
    }
}

/// Resource caps, with `DXD_CAPS` overrides such as
/// `max_kappa=100000,max_det_states=5000`.
pub fn caps_from_env() -> Result<Caps> {
    Caps::from_env().map_err(|e| Error::Io(format!("bad DXD_CAPS: {e}")))
}

/// Run one subcommand to a verdict, folding library errors into answers.
fn execute(cmd: &Cmd, caps: &Caps) -> Verdict {
    let (problem, result) = match cmd {
        Cmd::Validate { doc, target } => ("validate".to_string(), cmd_validate(doc, target, caps)),
        Cmd::Cons {
            kernel,
            typing,
            class,
            mechanism,
        } => (
            "cons".to_string(),
            cmd_cons_synth(kernel, typing, class, mechanism, None, false, caps),
        ),
        Cmd::Synth {
            kernel,
            typing,
            class,
            mechanism,
            out,
        } => (
            "synth".to_string(),
            cmd_cons_synth(kernel, typing, class, mechanism, out.as_deref(), true, caps),
        ),
        Cmd::Check {
            target,
            kernel,
            word,
            boxes,
            typing,
            property,
        } => (
            format!("check {property}"),
            cmd_check(target, kernel, word, boxes, typing, property, caps),
        ),
        Cmd::Find {
            target,
            kernel,
            word,
            boxes,
            property,
            all,
            out_dir,
        } => (
            format!("find {property}"),
            cmd_find(target, kernel, word, boxes, property, *all, out_dir.as_deref(), caps),
        ),
    };
    match result {
        Ok(v) => v,
        Err(Error::ResourceCap(m)) => {
            let mut v = Verdict::new(&problem, Answer::Undecided);
            v.diagnostics.push(format!("resource cap exceeded: {m}"));
            v
        }
        Err(Error::Inconsistent(m)) => {
            let mut v = Verdict::new(&problem, Answer::Inconsistent);
            v.diagnostics.push(format!("inconsistent typing: {m}"));
            v
        }
        Err(e) => {
            let mut v = Verdict::new(&problem, Answer::Error);
            v.diagnostics.push(e.to_string());
            v
        }
    }
}

/// File contents when the value is an existing path, the value itself
/// otherwise.
fn load_arg(value: &str) -> Result<String> {
    let p = Path::new(value);
    if p.is_file() {
        std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{value}: {e}")))
    } else {
        Ok(value.to_string())
    }
}

fn parse_class(s: &str) -> Result<GrammarClass> {
    match s {
        "dtd" => Ok(GrammarClass::Dtd),
        "sdtd" => Ok(GrammarClass::Sdtd),
        "edtd" => Ok(GrammarClass::Edtd),
        _ => Err(Error::Io(format!("unknown class `{s}` (dtd, sdtd, edtd)"))),
    }
}

fn parse_mech(s: &str) -> Result<Mechanism> {
    match s {
        "dre" => Ok(Mechanism::Dre),
        "nre" => Ok(Mechanism::Nre),
        "dfa" => Ok(Mechanism::Dfa),
        "nfa" => Ok(Mechanism::Nfa),
        _ => Err(Error::Io(format!(
            "unknown mechanism `{s}` (dre, nre, dfa, nfa)"
        ))),
    }
}

/// Resolve repeated `fN=value` bindings against the kernel's docking
/// points, returning the loaded values in positional order.
fn bind_typings(entries: &[String], functions: &[Symbol]) -> Result<Vec<String>> {
    let mut by_key: BTreeMap<String, String> = BTreeMap::new();
    for e in entries {
        let (key, value) = e.split_once('=').ok_or_else(|| {
            Error::Io(format!("bad --typing `{e}`: expected fN=<value>"))
        })?;
        if by_key.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Io(format!("--typing `{key}` given twice")));
        }
    }
    let mut out = Vec::new();
    for f in functions {
        let key = f.trim_start_matches('@');
        let value = by_key.remove(key).ok_or_else(|| {
            Error::MissingAssignment(f.clone())
        })?;
        out.push(load_arg(&value)?);
    }
    if let Some((stray, _)) = by_key.into_iter().next() {
        return Err(Error::Io(format!(
            "--typing `{stray}` does not match any docking point"
        )));
    }
    Ok(out)
}

fn slot_key(f: &Symbol) -> String {
    f.trim_start_matches('@').to_string()
}

/// Regex text to an automaton whose alphabet also covers `extra`.
fn word_lang(text: &str, extra: &[Symbol], caps: &Caps) -> Result<Nfa> {
    let ast = parse_regex(text.trim(), caps)?;
    let mut a = to_nfa(&ast);
    a.alphabet.extend(extra.iter().cloned());
    Ok(a)
}

fn word_text(w: &[Symbol]) -> String {
    if w.is_empty() {
        "%e".to_string()
    } else {
        w.join(" ")
    }
}

/// Best-effort regex rendering of an automaton for reports.
fn lang_text(a: &Nfa, caps: &Caps) -> String {
    match nfa_to_regex(a, caps) {
        Ok(r) => print_regex(&r),
        Err(_) => format!("<automaton, {} states>", a.labels.len()),
    }
}

/// Grammar rendering, realized in the requested mechanism when possible.
fn grammar_text(g: &Grammar, mech: Mechanism, caps: &Caps) -> Result<String> {
    let shown = realize_mechanism(g, mech, caps).unwrap_or_else(|_| g.clone());
    print_schema(&shown, caps)
}

// ---------------------------------------------------------------- validate

fn cmd_validate(doc: &str, target: &str, caps: &Caps) -> Result<Verdict> {
    let tree = parse_tree(&load_arg(doc)?)?;
    let grammar = load_schema(&load_arg(target)?, caps)?;
    let mut v = Verdict::of_bool("validate", validate(&tree, &grammar));
    if v.answer == Answer::No {
        v.diagnostics.push(violation_note(&tree, &grammar));
    }
    Ok(v)
}

/// Shallowest node whose own content fails while everything below it is
/// fine; falls back to a root note when every subtree derives some name.
fn violation_note(tree: &UTree, grammar: &Grammar) -> String {
    fn search(t: &UTree, g: &Grammar, path: &mut Vec<String>, hit: &mut Option<String>) {
        for (i, c) in t.children.iter().enumerate() {
            if hit.is_some() {
                return;
            }
            path.push(format!("{}[{}]", c.label, i + 1));
            search(c, g, path, hit);
            path.pop();
        }
        if hit.is_none() && derivable_names(t, g).is_empty() {
            *hit = Some(path.join("/"));
        }
    }
    let mut hit = None;
    let mut path = vec![tree.label.clone()];
    search(tree, grammar, &mut path, &mut hit);
    match hit {
        Some(p) => format!("first violation at {p}"),
        None => format!(
            "the tree matches some names but none at the root is `{}`",
            grammar.root
        ),
    }
}

// --------------------------------------------------------------- cons/synth

fn cmd_cons_synth(
    kernel: &str,
    typing: &[String],
    class: &str,
    mechanism: &str,
    out: Option<&Path>,
    synth: bool,
    caps: &Caps,
) -> Result<Verdict> {
    let kernel = parse_kernel(&load_arg(kernel)?)?;
    let texts = bind_typings(typing, &kernel.functions)?;
    let typing: Vec<Grammar> = texts
        .iter()
        .map(|t| load_schema(t, caps))
        .collect::<Result<_>>()?;
    let design = BottomUpDesign {
        kernel,
        typing,
        class: parse_class(class)?,
        mech: parse_mech(mechanism)?,
    };
    if !synth {
        return Ok(Verdict::of_bool("cons", cons(&design, caps)?));
    }
    let mut v = Verdict::new("synth", Answer::No);
    match synthesize_type(&design, caps)? {
        Some(g) => {
            v.answer = Answer::Yes;
            let text = print_schema(&g, caps)?;
            if let Some(path) = out {
                std::fs::write(path, &text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                v.diagnostics.push(format!("grammar written to {}", path.display()));
            }
            v.witness.insert("grammar".to_string(), text);
        }
        None => {
            v.diagnostics.push(format!(
                "the materializations are not definable as a {class} under mechanism {mechanism}"
            ));
        }
    }
    Ok(v)
}

// -------------------------------------------------------------- check/find

enum Design {
    Tree(TreeDesign),
    Word(WordDesign),
    Boxes(BoxDesign),
}

fn load_design(
    target: &str,
    kernel: &Option<String>,
    word: &Option<String>,
    boxes: &Option<String>,
    caps: &Caps,
) -> Result<Design> {
    let sources = [kernel.is_some(), word.is_some(), boxes.is_some()];
    if sources.iter().filter(|x| **x).count() != 1 {
        return Err(Error::Io(
            "give exactly one of --kernel, --word, --boxes".to_string(),
        ));
    }
    let target_text = load_arg(target)?;
    if let Some(k) = kernel {
        let g = load_schema(&target_text, caps)?;
        let k = parse_kernel(&load_arg(k)?)?;
        return Ok(Design::Tree(TreeDesign::new(g, k)?));
    }
    if let Some(w) = word {
        let kernel = parse_kernel_word(&load_arg(w)?)?;
        let extra: Vec<Symbol> = kernel.segments().iter().flatten().cloned().collect();
        let target = word_lang(&target_text, &extra, caps)?;
        return Ok(Design::Word(WordDesign { target, kernel }));
    }
    let b = boxes.as_ref().expect("one source is set");
    let kernel = parse_kernel_box(&load_arg(b)?)?;
    let extra: Vec<Symbol> = kernel
        .boxes()
        .iter()
        .flat_map(|bl| bl.symbols())
        .collect();
    let target = word_lang(&target_text, &extra, caps)?;
    Ok(Design::Boxes(BoxDesign { target, kernel }))
}

fn parse_property(s: &str) -> Result<Property> {
    Property::parse(s).ok_or_else(|| Error::Io(format!("unknown property `{s}` (loc, ml, perf)")))
}

fn cmd_check(
    target: &str,
    kernel: &Option<String>,
    word: &Option<String>,
    boxes: &Option<String>,
    typing: &[String],
    property: &str,
    caps: &Caps,
) -> Result<Verdict> {
    let prop = parse_property(property)?;
    let problem = format!("check {}", prop.as_str());
    let design = load_design(target, kernel, word, boxes, caps)?;
    let yes = match &design {
        Design::Tree(d) => {
            let texts = bind_typings(typing, &d.kernel.functions)?;
            let typing: Vec<Grammar> = texts
                .iter()
                .map(|t| load_schema(t, caps))
                .collect::<Result<_>>()?;
            check_tree(d, &typing, prop, caps)?
        }
        Design::Word(d) => {
            let langs = bound_word_typing(typing, d.kernel.functions(), &d.target, caps)?;
            match prop {
                Property::Local => check_local(d, &langs, caps)?,
                Property::MaximalLocal => check_maximal_local(d, &langs, caps)?,
                Property::Perfect => check_perfect(d, &langs, caps)?,
            }
        }
        Design::Boxes(d) => {
            let langs = bound_word_typing(typing, d.kernel.functions(), &d.target, caps)?;
            match prop {
                Property::Local => check_local_box(d, &langs, caps)?,
                Property::MaximalLocal => check_maximal_local_box(d, &langs, caps)?,
                Property::Perfect => check_perfect_box(d, &langs, caps)?,
            }
        }
    };
    Ok(Verdict::of_bool(&problem, yes))
}

fn bound_word_typing(
    entries: &[String],
    functions: &[Symbol],
    target: &Nfa,
    caps: &Caps,
) -> Result<Vec<Nfa>> {
    let extra: Vec<Symbol> = target.alphabet.iter().cloned().collect();
    bind_typings(entries, functions)?
        .iter()
        .map(|t| word_lang(t, &extra, caps))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_find(
    target: &str,
    kernel: &Option<String>,
    word: &Option<String>,
    boxes: &Option<String>,
    property: &str,
    all: bool,
    out_dir: Option<&Path>,
    caps: &Caps,
) -> Result<Verdict> {
    let prop = parse_property(property)?;
    if all && prop != Property::MaximalLocal {
        return Err(Error::Io("--all only applies to --property ml".to_string()));
    }
    let problem = format!("find {}", prop.as_str());
    let design = load_design(target, kernel, word, boxes, caps)?;
    let mut v = Verdict::new(&problem, Answer::No);
    match &design {
        Design::Tree(d) => {
            if all {
                let found = all_maximal_tree(d, caps)?;
                if !found.is_empty() {
                    v.answer = Answer::Yes;
                    v.diagnostics
                        .push(format!("{} maximal local typing(s)", found.len()));
                    for (i, typing) in found.iter().enumerate() {
                        for (f, g) in d.kernel.functions.iter().zip(typing) {
                            v.witness.insert(
                                format!("{}.{}", i + 1, slot_key(f)),
                                grammar_text(g, d.target.mech, caps)?,
                            );
                        }
                    }
                }
            } else if let Some(typing) = exists_tree(d, prop, caps)? {
                v.answer = Answer::Yes;
                for (f, g) in d.kernel.functions.iter().zip(&typing) {
                    v.witness
                        .insert(slot_key(f), grammar_text(g, d.target.mech, caps)?);
                }
            }
            if v.answer == Answer::No && prop == Property::Perfect {
                v.diagnostics.push(
                    "no candidate assignment of specialized names yields a perfect completion"
                        .to_string(),
                );
            }
        }
        Design::Word(d) => {
            let found = if all {
                let everything = all_maximal_local(d, caps)?;
                if everything.is_empty() {
                    None
                } else {
                    v.diagnostics
                        .push(format!("{} maximal local typing(s)", everything.len()));
                    for (i, typing) in everything.iter().enumerate() {
                        for (f, lang) in d.kernel.functions().iter().zip(typing) {
                            v.witness
                                .insert(format!("{}.{}", i + 1, slot_key(f)), lang_text(lang, caps));
                        }
                    }
                    Some(Vec::new())
                }
            } else {
                match prop {
                    Property::Local => exists_local(d, caps)?,
                    Property::MaximalLocal => exists_maximal_local(d, caps)?,
                    Property::Perfect => exists_perfect(d, caps)?,
                }
            };
            match found {
                Some(typing) => {
                    v.answer = Answer::Yes;
                    for (f, lang) in d.kernel.functions().iter().zip(&typing) {
                        v.witness.insert(slot_key(f), lang_text(lang, caps));
                    }
                }
                None if prop == Property::Perfect => {
                    let p = build_perfect(&d.target, &d.kernel, caps)?;
                    if !compatible(&p) {
                        v.diagnostics.push(
                            "the kernel's fixed parts cannot all occur inside the target"
                                .to_string(),
                        );
                    } else {
                        let omega = omega_typing(&p)?;
                        for (f, lang) in d.kernel.functions().iter().zip(&omega) {
                            v.witness
                                .insert(format!("candidate.{}", slot_key(f)), lang_text(lang, caps));
                        }
                        let w = w_tau(&d.kernel, &omega, caps)?;
                        if let Some(cex) = Nfa::counterexample_equivalent(&w, &d.target, caps)? {
                            v.diagnostics.push(format!(
                                "the candidate typing and the target disagree on `{}`",
                                word_text(&cex)
                            ));
                        }
                    }
                }
                None => {}
            }
        }
        Design::Boxes(d) => {
            let found = if all {
                let everything = all_maximal_local_box(d, caps)?;
                if everything.is_empty() {
                    None
                } else {
                    v.diagnostics
                        .push(format!("{} maximal local typing(s)", everything.len()));
                    for (i, typing) in everything.iter().enumerate() {
                        for (f, lang) in d.kernel.functions().iter().zip(typing) {
                            v.witness
                                .insert(format!("{}.{}", i + 1, slot_key(f)), lang_text(lang, caps));
                        }
                    }
                    Some(Vec::new())
                }
            } else {
                match prop {
                    Property::Local => exists_local_box(d, caps)?,
                    Property::MaximalLocal => exists_maximal_local_box(d, caps)?,
                    Property::Perfect => exists_perfect_box(d, caps)?,
                }
            };
            match found {
                Some(typing) => {
                    v.answer = Answer::Yes;
                    for (f, lang) in d.kernel.functions().iter().zip(&typing) {
                        v.witness.insert(slot_key(f), lang_text(lang, caps));
                    }
                    if prop == Property::Perfect {
                        v.diagnostics.push(
                            "decided by verifying the canonical candidate typing directly \
                             against the target"
                                .to_string(),
                        );
                    }
                }
                None if prop == Property::Perfect => {
                    let p = build_perfect_box(&d.target, &d.kernel, caps)?;
                    if !compatible(&p) {
                        v.diagnostics.push(
                            "the kernel's fixed parts cannot all occur inside the target"
                                .to_string(),
                        );
                    } else {
                        let omega = omega_typing(&p)?;
                        for (f, lang) in d.kernel.functions().iter().zip(&omega) {
                            v.witness
                                .insert(format!("candidate.{}", slot_key(f)), lang_text(lang, caps));
                        }
                        let w = b_tau(&d.kernel, &omega, caps)?;
                        if let Some(cex) = Nfa::counterexample_equivalent(&w, &d.target, caps)? {
                            v.diagnostics.push(format!(
                                "the candidate typing and the target disagree on `{}`",
                                word_text(&cex)
                            ));
                        }
                        v.diagnostics.push(
                            "for box problems this search only tests the canonical candidate; \
                             it cannot rule out typings strictly below it"
                                .to_string(),
                        );
                    }
                }
                None => {}
            }
        }
    }
    if let (Answer::Yes, Some(dir)) = (v.answer, out_dir) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let ext = if matches!(design, Design::Tree(_)) {
            "grammar"
        } else {
            "regex"
        };
        for (key, text) in &v.witness {
            let path = dir.join(format!("{key}.{ext}"));
            std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        }
        v.diagnostics
            .push(format!("witnesses written to {}", dir.display()));
    }
    Ok(v)
}

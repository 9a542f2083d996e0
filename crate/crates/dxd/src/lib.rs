//! Typing analysis for distributed documents.
//!
//! A distributed document is described by a kernel tree whose designated
//! leaves (docking points, written `@f1`, `@f2`, ...) refer to remote
//! sources. Each source delivers a forest that replaces its docking point at
//! materialization time. This crate answers the design questions that setup
//! raises, in both directions:
//!
//! * bottom-up: given per-source schemas, is the set of materialized
//!   documents definable in a schema class at all ([`bottom_up::cons`]), and
//!   if so, synthesize the global type ([`bottom_up::synthesize_type`]);
//! * top-down: given a global schema, verify or search for per-source typings
//!   that are sound, local, maximal local, or perfect
//!   ([`word_typing`], [`tree_typing`]).
//!
//! The engine underneath is ordinary automata theory: NFAs/DFAs
//! ([`automata`]), regular expressions with the one-unambiguity test and
//! deterministic-regex synthesis ([`regex`]), unranked-tree grammars in three
//! classes with dual automata and bottom-up determinization ([`schema`]), and
//! the slot-automaton construction that bounds every sound typing from above
//! ([`word_typing::build_perfect`]).
//!
//! See the `examples/` directory for end-to-end tours and `src/bin/dxd.rs`
//! for the command-line surface.

pub mod automata;
pub mod bottom_up;
pub mod cli;
pub mod document;
pub mod regex;
pub mod schema;
pub mod tree_typing;
pub mod word_typing;

/// Alphabet members and state labels. Element names are plain tokens
/// (`country`, `nationalIndex`); specialized names carry a `#` refinement
/// (`nationalIndex#A`); function symbols carry a leading `@` (`@f1`) and are
/// disjoint from element names by construction.
pub type Symbol = String;

/// True for docking-point symbols (`@`-prefixed).
pub fn is_function_symbol(s: &str) -> bool {
    s.starts_with('@')
}

/// Base element name of a possibly specialized name: `mu("b#2") == "b"`.
pub fn mu(name: &str) -> &str {
    match name.find('#') {
        Some(i) => &name[..i],
        None => name,
    }
}

/// Reserved root label generated for the local type of a docking point:
/// `@f1` gets `s_f1`. Users never write these in kernel files.
pub fn function_root_symbol(f: &str) -> Symbol {
    format!("s_{}", f.trim_start_matches('@'))
}

/// Resource limits for the searches that are exponential by nature.
/// Exceeding a cap is always reported as [`Error::ResourceCap`], never as a
/// definite verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caps {
    /// Per-slot bound on the number of legal slot automata before the
    /// decomposition step (the 2^k blowup).
    pub max_slot_automata: usize,
    /// Bound on the number of cell-subset vectors the local/maximal-local
    /// searches may enumerate.
    pub max_subset_vectors: u64,
    /// Bound on the number of specialization assignments enumerated in the
    /// tree-level searches.
    pub max_kappa: u64,
    /// Bound on regex AST size, parsed or synthesized.
    pub max_regex_nodes: usize,
    /// Bound on state counts produced by subset constructions (word and tree
    /// determinization alike).
    pub max_det_states: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_slot_automata: 16,
            max_subset_vectors: 1 << 20,
            max_kappa: 1 << 16,
            max_regex_nodes: 10_000,
            max_det_states: 1 << 20,
        }
    }
}

impl Caps {
    /// Parse comma-separated overrides keyed by field name, e.g.
    /// `max_kappa=100000,max_det_states=5000`. Unknown keys or malformed
    /// numbers are errors.
    pub fn apply_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| Error::Syntax {
                pos: 0,
                msg: format!("cap override `{part}` is not key=value"),
            })?;
            let n: u64 = value.trim().parse().map_err(|_| Error::Syntax {
                pos: 0,
                msg: format!("cap value `{value}` is not a number"),
            })?;
            match key.trim() {
                "max_slot_automata" => self.max_slot_automata = n as usize,
                "max_subset_vectors" => self.max_subset_vectors = n,
                "max_kappa" => self.max_kappa = n,
                "max_regex_nodes" => self.max_regex_nodes = n as usize,
                "max_det_states" => self.max_det_states = n as usize,
                other => {
                    return Err(Error::Syntax {
                        pos: 0,
                        msg: format!("unknown cap key `{other}`"),
                    })
                }
            }
        }
        Ok(self)
    }

    /// Defaults adjusted by the `DXD_CAPS` environment variable, if set.
    pub fn from_env() -> Result<Self> {
        match std::env::var("DXD_CAPS") {
            Ok(spec) => Caps::default().apply_overrides(&spec),
            Err(_) => Ok(Caps::default()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("duplicate docking point {0}")]
    DuplicateFunction(Symbol),
    #[error("docking point {0} is not a leaf")]
    FunctionNotLeaf(Symbol),
    #[error("kernel root {0} is a docking point")]
    FunctionRoot(Symbol),
    #[error("docking point {0} has no assignment")]
    MissingAssignment(Symbol),
    #[error("typing arity mismatch: kernel has {expected} docking points, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("empty language: {0}")]
    EmptyLanguage(String),
    #[error("not a deterministic regular expression: {0}")]
    NotDre(String),
    #[error("not representable in the requested mechanism: {0}")]
    NotRepresentable(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("inconsistent typing: {0}")]
    Inconsistent(String),
    #[error("design incompatible: {0}")]
    Incompatible(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

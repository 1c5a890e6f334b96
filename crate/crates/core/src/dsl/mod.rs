//! The checker language emitted by the code-generation loop.
//!
//! A program is a declarative list of clauses for one rule on one layer. The
//! language has no loops, recursion, or host access, so evaluation always
//! terminates and touches nothing but the layout it is given.
//!
//! ```text
//! rule "M0.S.1" on M0 {
//!     boundary x <= 1;
//!     boundary x >= max_x - 1;
//!     spacing horizontal <= 1 when prl_y >= -1;
//! }
//! ```

mod interp;
mod lexer;
mod parser;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use interp::run_program;
pub use parser::parse_program;

use crate::kernel::{Axis, Cmp, Exemption};
use crate::model::Layer;
use crate::rules::{RuleKind, RuleSpec};

/// Grammar version; bumped whenever a construct is added.
pub const GRAMMAR_VERSION: &str = "1";

/// EBNF grammar shipped with the prompts.
pub const GRAMMAR: &str = include_str!("../../assets/drcdsl.ebnf");

/// A compile error with 1-based position and the tokens that would have been accepted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl Diagnostic {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Diagnostic { line, column, message: message.into(), expected: Vec::new() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, "; expected one of: {}", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Atom {
    Int(i64),
    MaxX,
    MaxY,
}

/// Integer expression over literals, `max_x` and `max_y` joined by `+` and `-`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    /// `(negated, atom)` terms, summed.
    pub terms: Vec<(bool, Atom)>,
}

impl Expr {
    pub fn literal(v: i64) -> Self {
        Expr { terms: alloc::vec![(v < 0, Atom::Int(v.abs()))] }
    }

    pub fn eval(&self, max_x: u32, max_y: u32) -> i64 {
        self.terms
            .iter()
            .map(|(neg, a)| {
                let v = match a {
                    Atom::Int(i) => *i,
                    Atom::MaxX => max_x as i64,
                    Atom::MaxY => max_y as i64,
                };
                if *neg {
                    -v
                } else {
                    v
                }
            })
            .fold(0i64, |acc, v| acc.saturating_add(v))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (neg, atom)) in self.terms.iter().enumerate() {
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match atom {
                Atom::Int(v) => write!(f, "{v}")?,
                Atom::MaxX => f.write_str("max_x")?,
                Atom::MaxY => f.write_str("max_y")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Clause {
    /// Flags every component whose coordinate satisfies `axis cmp bound`.
    Boundary { axis: Axis, cmp: Cmp, bound: Expr },
    /// Flags pairs spaced `0 < d (cmp) limit` along `axis`, optionally gated by a
    /// PRL condition on the orthogonal axis.
    Spacing { axis: Axis, cmp: Cmp, limit: i64, prl: Option<(Cmp, i64)>, exemption: Exemption },
    /// Requires same-net `metal` to extend `extension` grids past each via along `axis`.
    Enclosure { metal: Layer, extension: u32, axis: Axis },
}

impl Clause {
    /// Largest violating distance of a spacing clause.
    pub fn max_distance(&self) -> Option<i64> {
        match self {
            Clause::Spacing { cmp: Cmp::Le, limit, .. } => Some(*limit),
            Clause::Spacing { cmp: Cmp::Lt, limit, .. } => Some(limit - 1),
            _ => None,
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::Boundary { axis, cmp, bound } => write!(f, "boundary {axis} {cmp} {bound};"),
            Clause::Spacing { axis, cmp, limit, prl, exemption } => {
                let dir = match axis {
                    Axis::X => "horizontal",
                    Axis::Y => "vertical",
                };
                write!(f, "spacing {dir} {cmp} {limit}")?;
                if let Some((c, t)) = prl {
                    write!(f, " when prl_{} {c} {t}", axis.other())?;
                }
                if *exemption == Exemption::None {
                    f.write_str(" exempt none")?;
                }
                f.write_str(";")
            }
            Clause::Enclosure { metal, extension, axis } => {
                write!(f, "enclosure by {metal} extend {extension} along {axis};")
            }
        }
    }
}

/// A parsed checker program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleProgram {
    pub source: String,
    pub rule_id: String,
    pub layer: Layer,
    pub clauses: Vec<Clause>,
}

impl RuleProgram {
    /// Canonical source text of the parsed program.
    pub fn canonical_source(&self) -> String {
        let mut s = alloc::format!("rule \"{}\" on {} {{\n", self.rule_id, self.layer);
        for c in &self.clauses {
            s.push_str("    ");
            s.push_str(&alloc::format!("{c}"));
            s.push('\n');
        }
        s.push_str("}\n");
        s
    }

    /// Program containing only the given clauses.
    pub fn with_clauses(&self, clauses: Vec<Clause>) -> RuleProgram {
        let mut p = RuleProgram { source: String::new(), clauses, ..self.clone() };
        p.source = p.canonical_source();
        p
    }
}

/// Reference programs for the builtin demo deck, as `(rule id, source)`.
pub const REFERENCE_PROGRAMS: [(&str, &str); 7] = [
    ("M0.S.1", include_str!("../../assets/reference/M0.S.1.drcdsl")),
    ("M0.S.2", include_str!("../../assets/reference/M0.S.2.drcdsl")),
    ("VIA0.S.1", include_str!("../../assets/reference/VIA0.S.1.drcdsl")),
    ("M1.S.1", include_str!("../../assets/reference/M1.S.1.drcdsl")),
    ("M1.S.2", include_str!("../../assets/reference/M1.S.2.drcdsl")),
    ("VIA1.S.1", include_str!("../../assets/reference/VIA1.S.1.drcdsl")),
    ("M2.S.1", include_str!("../../assets/reference/M2.S.1.drcdsl")),
];

/// Reference program source of a builtin demo rule.
pub fn reference_program(rule_id: &str) -> Option<&'static str> {
    REFERENCE_PROGRAMS.iter().find(|(id, _)| *id == rule_id).map(|(_, src)| *src)
}

/// Writes the DSL program equivalent to a rule spec.
pub fn transcribe_rule(spec: &RuleSpec) -> String {
    let mut clauses = Vec::new();
    if let Some(m) = spec.x_boundary_margin {
        clauses.push(alloc::format!("boundary x <= {m};"));
        clauses.push(alloc::format!("boundary x >= max_x - {m};"));
    }
    if let Some(m) = spec.y_boundary_margin {
        clauses.push(alloc::format!("boundary y <= {m};"));
        clauses.push(alloc::format!("boundary y >= max_y - {m};"));
    }
    match spec.kind {
        RuleKind::Enclosure => {
            if let (Some(metal), Some(ext), Some(axis)) =
                (spec.enclosing_layer, spec.enclosure_extension, spec.enclosure_axis())
            {
                clauses.push(alloc::format!("enclosure by {metal} extend {ext} along {axis};"));
            }
        }
        RuleKind::Spacing | RuleKind::ViaSpacing => {
            let exempt = if spec.kind == RuleKind::ViaSpacing { " exempt none" } else { "" };
            for axis in spec.spacing_direction().axes() {
                let (dir, prl) = match axis {
                    Axis::X => ("horizontal", "prl_y"),
                    Axis::Y => ("vertical", "prl_x"),
                };
                let cond = spec.prl_threshold.map(|t| alloc::format!(" when {prl} >= {t}")).unwrap_or_default();
                clauses.push(alloc::format!("spacing {dir} <= {}{cond}{exempt};", spec.spacing_threshold));
            }
        }
    }
    let mut s = alloc::format!("rule \"{}\" on {} {{\n", spec.rule_id, spec.layer);
    for c in clauses {
        s.push_str("    ");
        s.push_str(&c);
        s.push('\n');
    }
    s.push_str("}\n");
    s
}

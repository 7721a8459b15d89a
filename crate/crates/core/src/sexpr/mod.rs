//! S-expression logical forms: syntax tree, parser, validator and executor.
//!
//! The operator inventory is `AND`, `JOIN`, `R`, `COUNT`, `ARGMAX`, `ARGMIN`
//! and the comparatives `lt`, `le`, `gt`, `ge`. Identifiers are bare tokens
//! and literals are written `"value"^^kind`. A bare identifier in the target
//! slot of a `JOIN` names an entity; in every other expression slot it names
//! a type.

mod exec;
mod parse;

use std::fmt;

use crate::kb::{ElementRef, KnowledgeBase, Literal};

pub use exec::{execute, Answer, ExecError, Execution};
pub use parse::{parse, ParseError, ParseErrorKind};

/// A relation as used inside a logical form; `inverted` encodes `(R r)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RelationTerm {
    pub relation: String,
    pub inverted: bool,
}

impl RelationTerm {
    pub fn forward(relation: impl Into<String>) -> Self {
        RelationTerm {
            relation: relation.into(),
            inverted: false,
        }
    }

    pub fn inverse(relation: impl Into<String>) -> Self {
        RelationTerm {
            relation: relation.into(),
            inverted: true,
        }
    }
}

impl fmt::Display for RelationTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverted {
            write!(f, "(R {})", self.relation)
        } else {
            f.write_str(&self.relation)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub const ALL: [Comparator; 4] = [
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Comparator::Lt => "lt",
            Comparator::Le => "le",
            Comparator::Gt => "gt",
            Comparator::Ge => "ge",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Comparator::Lt => ord == Less,
            Comparator::Le => ord != Greater,
            Comparator::Gt => ord == Greater,
            Comparator::Ge => ord != Less,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Extremum {
    Max,
    Min,
}

impl Extremum {
    pub fn keyword(self) -> &'static str {
        match self {
            Extremum::Max => "ARGMAX",
            Extremum::Min => "ARGMIN",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Entity(String),
    Type(String),
    Literal(Literal),
    And(Box<Expr>, Box<Expr>),
    Join(RelationTerm, Box<Expr>),
    Count(Box<Expr>),
    Arg(Extremum, Box<Expr>, RelationTerm),
    Compare(Comparator, RelationTerm, Literal),
}

impl Expr {
    /// Depth of the tree; atoms have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Entity(_) | Expr::Type(_) | Expr::Literal(_) | Expr::Compare(..) => 1,
            Expr::And(a, b) => 1 + a.depth().max(b.depth()),
            Expr::Join(_, x) | Expr::Count(x) | Expr::Arg(_, x, _) => 1 + x.depth(),
        }
    }

    fn visit_elements<'a>(&'a self, out: &mut Vec<ElementRef>) {
        match self {
            Expr::Entity(e) => out.push(ElementRef::Entity(e.clone())),
            Expr::Type(t) => out.push(ElementRef::Type(t.clone())),
            Expr::Literal(_) => {}
            Expr::And(a, b) => {
                a.visit_elements(out);
                b.visit_elements(out);
            }
            Expr::Join(r, x) => {
                out.push(ElementRef::Relation(r.relation.clone()));
                x.visit_elements(out);
            }
            Expr::Count(x) => x.visit_elements(out),
            Expr::Arg(_, x, r) => {
                x.visit_elements(out);
                out.push(ElementRef::Relation(r.relation.clone()));
            }
            Expr::Compare(_, r, _) => out.push(ElementRef::Relation(r.relation.clone())),
        }
    }

    /// True if the expression uses an operator whose result is not monotone
    /// in the fact set (extremum, comparative or count).
    pub fn has_non_monotone_operator(&self) -> bool {
        match self {
            Expr::Entity(_) | Expr::Type(_) | Expr::Literal(_) => false,
            Expr::Arg(..) | Expr::Compare(..) | Expr::Count(_) => true,
            Expr::And(a, b) => a.has_non_monotone_operator() || b.has_non_monotone_operator(),
            Expr::Join(_, x) => x.has_non_monotone_operator(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Entity(id) | Expr::Type(id) => f.write_str(id),
            Expr::Literal(lit) => lit.fmt(f),
            Expr::And(a, b) => write!(f, "(AND {a} {b})"),
            Expr::Join(r, x) => write!(f, "(JOIN {r} {x})"),
            Expr::Count(x) => write!(f, "(COUNT {x})"),
            Expr::Arg(ext, x, r) => write!(f, "({} {x} {r})", ext.keyword()),
            Expr::Compare(c, r, v) => write!(f, "({} {r} {v})", c.keyword()),
        }
    }
}

/// A parsed logical form. `Display` gives the canonical rendering.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LogicalForm {
    root: Expr,
}

impl LogicalForm {
    pub fn new(root: Expr) -> Self {
        LogicalForm { root }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// Entity, type and relation references in document order, deduplicated.
    pub fn elements(&self) -> Vec<ElementRef> {
        let mut all = Vec::new();
        self.root.visit_elements(&mut all);
        let mut seen = std::collections::HashSet::new();
        all.retain(|g| seen.insert(g.clone()));
        all
    }

    /// Types and relations cited by the form.
    pub fn schema_elements(&self) -> Vec<ElementRef> {
        self.elements()
            .into_iter()
            .filter(ElementRef::is_schema)
            .collect()
    }

    /// Whether `g` occurs as an atom or relation term of matching kind.
    /// Logical forms never cite facts.
    pub fn contains_element(&self, g: &ElementRef) -> bool {
        if matches!(g, ElementRef::Fact(_)) {
            return false;
        }
        self.elements().contains(g)
    }

    pub fn validate(&self, kb: &KnowledgeBase) -> ValidityReport {
        let missing: Vec<ElementRef> = self
            .elements()
            .into_iter()
            .filter(|g| !kb.contains(g))
            .collect();
        ValidityReport {
            valid: missing.is_empty(),
            missing,
        }
    }
}

impl fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for LogicalForm {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Elements a logical form cites but a knowledge base lacks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityReport {
    pub valid: bool,
    pub missing: Vec<ElementRef>,
}

pub fn validate(lf: &LogicalForm, kb: &KnowledgeBase) -> ValidityReport {
    lf.validate(kb)
}

pub fn contains_element(lf: &LogicalForm, g: &ElementRef) -> bool {
    lf.contains_element(g)
}

#[cfg(test)]
mod tests;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{Comparator, Expr, Extremum, LogicalForm, RelationTerm};
use crate::kb::{ElementRef, Fact, KnowledgeBase, Literal, LiteralError, LiteralKind, Object};

/// One member of an answer set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Answer {
    Entity(String),
    Literal(Literal),
}

impl From<&Object> for Answer {
    fn from(o: &Object) -> Self {
        match o {
            Object::Entity(e) => Answer::Entity(e.clone()),
            Object::Literal(l) => Answer::Literal(l.clone()),
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Entity(e) => f.write_str(e),
            Answer::Literal(l) => l.fmt(f),
        }
    }
}

impl FromStr for Answer {
    type Err = LiteralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with('"') {
            Ok(Answer::Literal(s.parse()?))
        } else {
            Ok(Answer::Entity(s.to_string()))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("logical form cites elements missing from the knowledge base: {}", list(.0))]
    Invalid(Vec<ElementRef>),
    #[error("cannot compare {left} with {right}")]
    Incomparable { left: Literal, right: Literal },
    #[error("relation `{0}` yields non-literal values where literals are required")]
    NonLiteralValue(String),
    #[error("string literal {0} cannot be used in a comparison")]
    StringComparison(Literal),
}

fn list(items: &[ElementRef]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Result of running a logical form, with the supporting facts per answer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Execution {
    pub answers: BTreeSet<Answer>,
    pub paths: BTreeMap<Answer, BTreeSet<Fact>>,
    /// Set when the root operator is `COUNT`; a zero count leaves `answers` empty.
    pub count: Option<usize>,
}

impl Execution {
    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    /// Union of the support paths of every answer.
    pub fn support(&self) -> BTreeSet<Fact> {
        self.paths.values().flatten().cloned().collect()
    }
}

type Denotation = BTreeMap<Answer, BTreeSet<Fact>>;

/// Executes a logical form. Invalid forms are rejected.
pub fn execute(lf: &LogicalForm, kb: &KnowledgeBase) -> Result<Execution, ExecError> {
    let report = lf.validate(kb);
    if !report.valid {
        return Err(ExecError::Invalid(report.missing));
    }
    let den = eval(lf.root(), kb)?;
    let mut exec = Execution::default();
    if let Expr::Count(_) = lf.root() {
        let n = count_of(&den);
        exec.count = Some(n);
        if n == 0 {
            return Ok(exec);
        }
    }
    exec.answers = den.keys().cloned().collect();
    exec.paths = den;
    Ok(exec)
}

fn count_of(den: &Denotation) -> usize {
    match den.keys().next() {
        Some(Answer::Literal(l)) => l.lexical().parse().unwrap_or(0),
        _ => 0,
    }
}

fn eval(expr: &Expr, kb: &KnowledgeBase) -> Result<Denotation, ExecError> {
    Ok(match expr {
        Expr::Entity(e) => Denotation::from([(Answer::Entity(e.clone()), BTreeSet::new())]),
        Expr::Type(t) => kb
            .instances_of(t)
            .into_iter()
            .map(|e| (Answer::Entity(e.to_string()), BTreeSet::new()))
            .collect(),
        Expr::Literal(l) => Denotation::from([(Answer::Literal(l.clone()), BTreeSet::new())]),
        Expr::And(a, b) => {
            let left = eval(a, kb)?;
            let right = eval(b, kb)?;
            left.into_iter()
                .filter_map(|(k, mut sup)| {
                    right.get(&k).map(|other| {
                        sup.extend(other.iter().cloned());
                        (k, sup)
                    })
                })
                .collect()
        }
        Expr::Join(rt, x) => {
            let inner = eval(x, kb)?;
            let mut out = Denotation::new();
            for f in kb.facts_of_relation(&rt.relation) {
                let (from, to) = if rt.inverted {
                    (Answer::Entity(f.subject.clone()), Answer::from(&f.object))
                } else {
                    (Answer::from(&f.object), Answer::Entity(f.subject.clone()))
                };
                if let Some(sup) = inner.get(&from) {
                    let entry = out.entry(to).or_default();
                    entry.insert(f.clone());
                    entry.extend(sup.iter().cloned());
                }
            }
            out
        }
        Expr::Count(x) => {
            let inner = eval(x, kb)?;
            let support = inner.values().flatten().cloned().collect();
            Denotation::from([(
                Answer::Literal(Literal::integer(inner.len() as i64)),
                support,
            )])
        }
        Expr::Arg(ext, x, rt) => arg_extremum(*ext, &eval(x, kb)?, rt, kb)?,
        Expr::Compare(cmp, rt, v) => compare(*cmp, rt, v, kb)?,
    })
}

/// Literal values reachable from `member` through `rt`, with the fact giving each.
fn values_of<'k>(
    member: &Answer,
    rt: &RelationTerm,
    kb: &'k KnowledgeBase,
) -> Result<Vec<(&'k Literal, &'k Fact)>, ExecError> {
    let mut out = Vec::new();
    for f in kb.facts_of_relation(&rt.relation) {
        let (from, to) = if rt.inverted {
            (Answer::from(&f.object), None)
        } else {
            let to = match &f.object {
                Object::Literal(l) => Some(l),
                Object::Entity(_) => None,
            };
            (Answer::Entity(f.subject.clone()), to)
        };
        if from != *member {
            continue;
        }
        match to {
            Some(lit) => out.push((lit, f)),
            None => return Err(ExecError::NonLiteralValue(rt.relation.clone())),
        }
    }
    Ok(out)
}

fn ordered(a: &Literal, b: &Literal) -> Result<Ordering, ExecError> {
    if a.kind() == LiteralKind::String {
        return Err(ExecError::StringComparison(a.clone()));
    }
    a.compare(b).ok_or_else(|| ExecError::Incomparable {
        left: a.clone(),
        right: b.clone(),
    })
}

fn arg_extremum(
    ext: Extremum,
    inner: &Denotation,
    rt: &RelationTerm,
    kb: &KnowledgeBase,
) -> Result<Denotation, ExecError> {
    let better = |ord: Ordering| match ext {
        Extremum::Max => ord == Ordering::Greater,
        Extremum::Min => ord == Ordering::Less,
    };
    // best value per member, with every fact achieving it
    let mut scored: Vec<(&Answer, &Literal, BTreeSet<Fact>)> = Vec::new();
    for (member, sup) in inner {
        let mut best: Option<(&Literal, BTreeSet<Fact>)> = None;
        for (lit, fact) in values_of(member, rt, kb)? {
            match &mut best {
                None => best = Some((lit, BTreeSet::from([fact.clone()]))),
                Some((cur, facts)) => {
                    let ord = ordered(lit, cur)?;
                    if better(ord) {
                        *cur = lit;
                        *facts = BTreeSet::from([fact.clone()]);
                    } else if ord == Ordering::Equal {
                        facts.insert(fact.clone());
                    }
                }
            }
        }
        if let Some((lit, mut facts)) = best {
            facts.extend(sup.iter().cloned());
            scored.push((member, lit, facts));
        }
    }
    let mut top: Option<&Literal> = None;
    for (_, lit, _) in &scored {
        match top {
            None => top = Some(lit),
            Some(cur) => {
                if better(ordered(lit, cur)?) {
                    top = Some(lit);
                }
            }
        }
    }
    let Some(top) = top else {
        return Ok(Denotation::new());
    };
    let mut out = Denotation::new();
    for (member, lit, facts) in scored {
        if ordered(lit, top)? == Ordering::Equal {
            out.insert(member.clone(), facts);
        }
    }
    Ok(out)
}

fn compare(
    cmp: Comparator,
    rt: &RelationTerm,
    value: &Literal,
    kb: &KnowledgeBase,
) -> Result<Denotation, ExecError> {
    if value.kind() == LiteralKind::String {
        return Err(ExecError::StringComparison(value.clone()));
    }
    let mut out = Denotation::new();
    for f in kb.facts_of_relation(&rt.relation) {
        let (lit, member) = match (&f.object, rt.inverted) {
            (Object::Literal(l), false) => (l, Answer::Entity(f.subject.clone())),
            _ => return Err(ExecError::NonLiteralValue(rt.relation.clone())),
        };
        if cmp.holds(ordered(lit, value)?) {
            out.entry(member).or_default().insert(f.clone());
        }
    }
    Ok(out)
}

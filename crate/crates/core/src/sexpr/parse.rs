use thiserror::Error;

use super::{Comparator, Expr, Extremum, LogicalForm, RelationTerm};
use crate::kb::Literal;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} at offset {position}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unexpected trailing input")]
    Trailing,
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("`{op}` takes {expected} argument(s), found {found}")]
    Arity {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("malformed literal: {0}")]
    MalformedLiteral(String),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("`NK` is a label, not a logical form")]
    ReservedNk,
}

fn err<T>(position: usize, kind: ParseErrorKind) -> Result<T, ParseError> {
    Err(ParseError { position, kind })
}

enum Sexp<'a> {
    Atom(&'a str, usize),
    Literal(Literal, usize),
    List(Vec<Sexp<'a>>, usize),
}

impl Sexp<'_> {
    fn position(&self) -> usize {
        match self {
            Sexp::Atom(_, p) | Sexp::Literal(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn read(&mut self) -> Result<Sexp<'a>, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => err(start, ParseErrorKind::Unbalanced),
            Some(')') => err(start, ParseErrorKind::Unbalanced),
            Some('(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        None => return err(start, ParseErrorKind::Unbalanced),
                        Some(')') => {
                            self.pos += 1;
                            return Ok(Sexp::List(items, start));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some('"') => {
                let rest = &self.src[start + 1..];
                let Some(close) = rest.find('"') else {
                    return err(
                        start,
                        ParseErrorKind::MalformedLiteral("unterminated quote".into()),
                    );
                };
                let after = start + 1 + close + 1;
                let tail = &self.src[after..];
                let kind_len = tail
                    .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
                    .unwrap_or(tail.len());
                let text = &self.src[start..after + kind_len];
                self.pos = after + kind_len;
                match text.parse::<Literal>() {
                    Ok(lit) => Ok(Sexp::Literal(lit, start)),
                    Err(e) => err(start, ParseErrorKind::MalformedLiteral(e.to_string())),
                }
            }
            Some(_) => {
                let rest = &self.src[start..];
                let len = rest
                    .find(|c: char| c.is_whitespace() || matches!(c, '(' | ')' | '"'))
                    .unwrap_or(rest.len());
                self.pos += len;
                Ok(Sexp::Atom(&rest[..len], start))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Expr,
    JoinTarget,
}

fn arity(op: &str, items: &[Sexp<'_>], expected: usize, position: usize) -> Result<(), ParseError> {
    let found = items.len() - 1;
    if found != expected {
        return err(
            position,
            ParseErrorKind::Arity {
                op: op.to_string(),
                expected,
                found,
            },
        );
    }
    Ok(())
}

fn relation_term(s: &Sexp<'_>) -> Result<RelationTerm, ParseError> {
    match s {
        Sexp::Atom(id, p) => {
            check_identifier(id, *p)?;
            Ok(RelationTerm::forward(*id))
        }
        Sexp::List(items, p) => match items.first() {
            Some(Sexp::Atom("R", _)) => {
                arity("R", items, 1, *p)?;
                match &items[1] {
                    Sexp::Atom(id, q) => {
                        check_identifier(id, *q)?;
                        Ok(RelationTerm::inverse(*id))
                    }
                    other => err(
                        other.position(),
                        ParseErrorKind::Expected("relation identifier"),
                    ),
                }
            }
            _ => err(*p, ParseErrorKind::Expected("relation or (R relation)")),
        },
        Sexp::Literal(_, p) => err(*p, ParseErrorKind::Expected("relation")),
    }
}

fn literal(s: &Sexp<'_>) -> Result<Literal, ParseError> {
    match s {
        Sexp::Literal(lit, _) => Ok(lit.clone()),
        other => err(other.position(), ParseErrorKind::Expected("literal")),
    }
}

fn check_identifier(id: &str, position: usize) -> Result<(), ParseError> {
    const OPERATORS: [&str; 10] = [
        "AND", "JOIN", "R", "COUNT", "ARGMAX", "ARGMIN", "lt", "le", "gt", "ge",
    ];
    if id == "NK" {
        return err(position, ParseErrorKind::ReservedNk);
    }
    if OPERATORS.contains(&id) {
        return err(
            position,
            ParseErrorKind::Expected("identifier, found operator"),
        );
    }
    Ok(())
}

fn expr(s: &Sexp<'_>, slot: Slot) -> Result<Expr, ParseError> {
    match s {
        Sexp::Atom(id, p) => {
            check_identifier(id, *p)?;
            Ok(match slot {
                Slot::JoinTarget => Expr::Entity(id.to_string()),
                Slot::Expr => Expr::Type(id.to_string()),
            })
        }
        Sexp::Literal(lit, _) => Ok(Expr::Literal(lit.clone())),
        Sexp::List(items, p) => {
            let p = *p;
            let op = match items.first() {
                None => return err(p, ParseErrorKind::Empty),
                Some(Sexp::Atom(op, _)) => *op,
                Some(other) => return err(other.position(), ParseErrorKind::Expected("operator")),
            };
            match op {
                "AND" => {
                    arity(op, items, 2, p)?;
                    Ok(Expr::And(
                        Box::new(expr(&items[1], Slot::Expr)?),
                        Box::new(expr(&items[2], Slot::Expr)?),
                    ))
                }
                "JOIN" => {
                    arity(op, items, 2, p)?;
                    Ok(Expr::Join(
                        relation_term(&items[1])?,
                        Box::new(expr(&items[2], Slot::JoinTarget)?),
                    ))
                }
                "COUNT" => {
                    arity(op, items, 1, p)?;
                    Ok(Expr::Count(Box::new(expr(&items[1], Slot::Expr)?)))
                }
                "ARGMAX" | "ARGMIN" => {
                    arity(op, items, 2, p)?;
                    let ext = if op == "ARGMAX" {
                        Extremum::Max
                    } else {
                        Extremum::Min
                    };
                    Ok(Expr::Arg(
                        ext,
                        Box::new(expr(&items[1], Slot::Expr)?),
                        relation_term(&items[2])?,
                    ))
                }
                _ => match Comparator::ALL.into_iter().find(|c| c.keyword() == op) {
                    Some(cmp) => {
                        arity(op, items, 2, p)?;
                        Ok(Expr::Compare(
                            cmp,
                            relation_term(&items[1])?,
                            literal(&items[2])?,
                        ))
                    }
                    None => err(
                        items[0].position(),
                        ParseErrorKind::UnknownOperator(op.to_string()),
                    ),
                },
            }
        }
    }
}

/// Parses an s-expression into a logical form.
pub fn parse(text: &str) -> Result<LogicalForm, ParseError> {
    let mut reader = Reader { src: text, pos: 0 };
    reader.skip_ws();
    if reader.peek().is_none() {
        return err(0, ParseErrorKind::Empty);
    }
    let sexp = reader.read()?;
    reader.skip_ws();
    if reader.pos < text.len() {
        let kind = if reader.peek() == Some(')') {
            ParseErrorKind::Unbalanced
        } else {
            ParseErrorKind::Trailing
        };
        return err(reader.pos, kind);
    }
    Ok(LogicalForm::new(expr(&sexp, Slot::Expr)?))
}

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralKind {
    Integer,
    Float,
    Date,
    String,
}

impl LiteralKind {
    pub const ALL: [LiteralKind; 4] = [
        LiteralKind::Integer,
        LiteralKind::Float,
        LiteralKind::Date,
        LiteralKind::String,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LiteralKind::Integer => "integer",
            LiteralKind::Float => "float",
            LiteralKind::Date => "date",
            LiteralKind::String => "string",
        }
    }

    fn is_numeric(self) -> bool {
        matches!(self, LiteralKind::Integer | LiteralKind::Float)
    }
}

impl fmt::Display for LiteralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LiteralKind {
    type Err = LiteralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LiteralKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LiteralError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiteralError {
    #[error("unknown literal kind `{0}`")]
    UnknownKind(String),
    #[error("`{lexical}` is not a valid {kind} literal")]
    BadValue { lexical: String, kind: LiteralKind },
    #[error("literal syntax is \"value\"^^kind, got `{0}`")]
    Syntax(String),
}

/// Typed literal value, kept in its lexical form.
///
/// Equality is lexical; ordering across values goes through [`Literal::compare`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    kind: LiteralKind,
    lexical: String,
}

impl Literal {
    pub fn new(lexical: impl Into<String>, kind: LiteralKind) -> Result<Self, LiteralError> {
        let lexical = lexical.into();
        let ok = match kind {
            LiteralKind::Integer => lexical.parse::<i64>().is_ok(),
            LiteralKind::Float => lexical.parse::<f64>().is_ok_and(f64::is_finite),
            LiteralKind::Date => parse_date(&lexical).is_some(),
            LiteralKind::String => !lexical.contains('"'),
        };
        if ok {
            Ok(Literal { kind, lexical })
        } else {
            Err(LiteralError::BadValue { lexical, kind })
        }
    }

    pub fn integer(value: i64) -> Self {
        Literal {
            kind: LiteralKind::Integer,
            lexical: value.to_string(),
        }
    }

    pub fn kind(&self) -> LiteralKind {
        self.kind
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    fn numeric(&self) -> Option<f64> {
        self.kind
            .is_numeric()
            .then(|| self.lexical.parse().ok())
            .flatten()
    }

    /// Orders two literals. Integers and floats compare numerically, dates
    /// chronologically. Strings and mixed kinds are incomparable.
    pub fn compare(&self, other: &Literal) -> Option<Ordering> {
        match (self.kind, other.kind) {
            (a, b) if a.is_numeric() && b.is_numeric() => {
                if a == LiteralKind::Integer && b == LiteralKind::Integer {
                    let x: i64 = self.lexical.parse().ok()?;
                    let y: i64 = other.lexical.parse().ok()?;
                    Some(x.cmp(&y))
                } else {
                    self.numeric()?.partial_cmp(&other.numeric()?)
                }
            }
            (LiteralKind::Date, LiteralKind::Date) => {
                Some(parse_date(&self.lexical)?.cmp(&parse_date(&other.lexical)?))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"^^{}", self.lexical, self.kind)
    }
}

impl FromStr for Literal {
    type Err = LiteralError;

    /// Parses `"value"^^kind`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || LiteralError::Syntax(s.to_string());
        let rest = s.strip_prefix('"').ok_or_else(syntax)?;
        let close = rest.find('"').ok_or_else(syntax)?;
        let (value, tail) = rest.split_at(close);
        let kind = tail[1..].strip_prefix("^^").ok_or_else(syntax)?;
        Literal::new(value, kind.parse()?)
    }
}

/// `YYYY`, `YYYY-MM` or `YYYY-MM-DD`; missing parts sort as the first month/day.
fn parse_date(s: &str) -> Option<(i32, u8, u8)> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let mut parts = body.split('-');
    let year_str = parts.next()?;
    if year_str.len() < 4 || !year_str.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut year: i32 = year_str.parse().ok()?;
    if neg {
        year = -year;
    }
    let mut field = |max: u8| -> Option<Option<u8>> {
        match parts.next() {
            None => Some(None),
            Some(p) if p.len() == 2 && p.bytes().all(|b| b.is_ascii_digit()) => {
                let v: u8 = p.parse().ok()?;
                (1..=max).contains(&v).then_some(Some(v))
            }
            Some(_) => None,
        }
    };
    let month = field(12)?;
    let day = field(31)?;
    if parts.next().is_some() || (month.is_none() && day.is_some()) {
        return None;
    }
    Some((year, month.unwrap_or(1), day.unwrap_or(1)))
}

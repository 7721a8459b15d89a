//! Flat-file formats for schemas and facts.
//!
//! Schema file, one directive per line (`#` starts a comment line):
//!
//! ```text
//! format_version 1
//! type person
//! type researcher person
//! relation works_at person org
//! relation founded_year org date
//! entity a1 person,researcher Ada Lovelace
//! ```
//!
//! `type <id> [<parent>...]`, `relation <id> <domain-type> <range>` where the
//! range is a type id or one of the literal kinds `integer`, `float`, `date`,
//! `string`, and `entity <id> <type>[,<type>...] [label]`.
//!
//! Facts file: one `subject<TAB>relation<TAB>object` triple per line, with
//! literal objects written as `"value"^^kind`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{
    find_type_cycle, ElementKind, Fact, KbError, KnowledgeBase, Literal, LiteralKind, Object, Range,
};

pub const FORMAT_VERSION: u32 = 1;

const SCHEMA: &str = "schema";
const FACTS: &str = "facts";

fn malformed(source_name: &'static str, line: usize, message: impl Into<String>) -> KbError {
    KbError::Malformed {
        source_name,
        line,
        message: message.into(),
    }
}

fn check_id(source_name: &'static str, line: usize, id: &str) -> Result<(), KbError> {
    let bad = id.is_empty()
        || id == "NK"
        || id.starts_with('#')
        || id
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '(' | ')' | '"' | ','));
    if bad {
        return Err(malformed(
            source_name,
            line,
            format!("invalid identifier `{id}`"),
        ));
    }
    Ok(())
}

struct TypeLine {
    line: usize,
    parents: BTreeSet<String>,
}

/// Loads a knowledge base from schema and facts text.
pub fn load_kb(schema_source: &str, facts_source: &str) -> Result<KnowledgeBase, KbError> {
    let mut types: BTreeMap<String, TypeLine> = BTreeMap::new();
    let mut relations: Vec<(usize, String, String, String)> = Vec::new();
    let mut entities: Vec<(usize, String, Vec<String>, String)> = Vec::new();

    for (idx, raw) in schema_source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let directive = tokens.next().unwrap_or_default();
        match directive {
            "format_version" => {
                let v = tokens.next().and_then(|v| v.parse::<u32>().ok());
                if v != Some(FORMAT_VERSION) {
                    return Err(malformed(SCHEMA, line, "unsupported format_version"));
                }
            }
            "type" => {
                let id = tokens
                    .next()
                    .ok_or_else(|| malformed(SCHEMA, line, "type needs an id"))?;
                check_id(SCHEMA, line, id)?;
                if id.parse::<LiteralKind>().is_ok() {
                    return Err(malformed(
                        SCHEMA,
                        line,
                        format!("`{id}` is a reserved literal kind"),
                    ));
                }
                let parents: BTreeSet<String> = tokens.map(str::to_string).collect();
                for p in &parents {
                    check_id(SCHEMA, line, p)?;
                }
                if types
                    .insert(id.to_string(), TypeLine { line, parents })
                    .is_some()
                {
                    return Err(KbError::Duplicate {
                        line: Some(line),
                        kind: ElementKind::Type,
                        id: id.to_string(),
                    });
                }
            }
            "relation" => {
                let fields: Vec<&str> = tokens.collect();
                let [id, domain, range] = fields[..] else {
                    return Err(malformed(
                        SCHEMA,
                        line,
                        "expected `relation <id> <domain> <range>`",
                    ));
                };
                for t in [id, domain, range] {
                    check_id(SCHEMA, line, t)?;
                }
                relations.push((line, id.into(), domain.into(), range.into()));
            }
            "entity" => {
                let id = tokens
                    .next()
                    .ok_or_else(|| malformed(SCHEMA, line, "entity needs an id"))?;
                check_id(SCHEMA, line, id)?;
                let tags = tokens
                    .next()
                    .ok_or_else(|| malformed(SCHEMA, line, format!("entity `{id}` needs types")))?;
                let tags: Vec<String> = tags.split(',').map(str::to_string).collect();
                for t in &tags {
                    check_id(SCHEMA, line, t)?;
                }
                let label = tokens.collect::<Vec<_>>().join(" ");
                entities.push((line, id.into(), tags, label));
            }
            other => {
                return Err(malformed(
                    SCHEMA,
                    line,
                    format!("unknown directive `{other}`"),
                ));
            }
        }
    }

    for (id, t) in &types {
        for p in &t.parents {
            if !types.contains_key(p) {
                return Err(KbError::Dangling {
                    line: Some(t.line),
                    kind: ElementKind::Type,
                    id: p.clone(),
                    context: format!("parent of type `{id}`"),
                });
            }
        }
    }
    if let Some(t) = find_type_cycle(types.iter().map(|(id, t)| (id.as_str(), &t.parents))) {
        return Err(KbError::CyclicHierarchy(t));
    }

    let mut kb = KnowledgeBase::new();
    // parents first
    let mut inserted: BTreeSet<&str> = BTreeSet::new();
    while inserted.len() < types.len() {
        for (id, t) in &types {
            if !inserted.contains(id.as_str())
                && t.parents.iter().all(|p| inserted.contains(p.as_str()))
            {
                kb.add_type(id.clone(), t.parents.iter().cloned())?;
                inserted.insert(id);
            }
        }
    }

    for (line, id, domain, range) in relations {
        let range = match range.parse::<LiteralKind>() {
            Ok(kind) => Range::Literal(kind),
            Err(_) => Range::Type(range),
        };
        kb.add_relation(id, domain, range)
            .map_err(|e| with_line(e, line))?;
    }
    for (line, id, tags, label) in entities {
        kb.add_entity(id, tags, label)
            .map_err(|e| with_line(e, line))?;
    }

    for (idx, raw) in facts_source.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let [subject, relation, object] = fields[..] else {
            return Err(malformed(
                FACTS,
                line,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        };
        let object = if object.starts_with('"') {
            Object::Literal(
                object
                    .parse::<Literal>()
                    .map_err(|e| malformed(FACTS, line, e.to_string()))?,
            )
        } else {
            check_id(FACTS, line, object)?;
            Object::Entity(object.to_string())
        };
        check_id(FACTS, line, subject)?;
        check_id(FACTS, line, relation)?;
        let added = kb
            .add_fact(Fact::new(subject, relation, object))
            .map_err(|e| with_line(e, line))?;
        if !added {
            return Err(malformed(FACTS, line, "duplicate fact"));
        }
    }
    Ok(kb)
}

fn with_line(err: KbError, at: usize) -> KbError {
    match err {
        KbError::Dangling {
            kind, id, context, ..
        } => KbError::Dangling {
            line: Some(at),
            kind,
            id,
            context,
        },
        KbError::Duplicate { kind, id, .. } => KbError::Duplicate {
            line: Some(at),
            kind,
            id,
        },
        KbError::RangeMismatch { fact, range } => malformed(
            FACTS,
            at,
            format!("object of {fact} does not match range `{range}`"),
        ),
        other => other,
    }
}

/// Renders the schema and entity declarations in the schema file format.
pub fn render_schema(kb: &KnowledgeBase) -> String {
    let mut out = format!("format_version {FORMAT_VERSION}\n");
    for (id, decl) in kb.types() {
        out.push_str("type ");
        out.push_str(id);
        for p in &decl.parents {
            out.push(' ');
            out.push_str(p);
        }
        out.push('\n');
    }
    for (id, decl) in kb.relations() {
        let _ = writeln!(out, "relation {id} {} {}", decl.domain, decl.range);
    }
    for (id, decl) in kb.entities() {
        let tags: Vec<&str> = decl.types.iter().map(String::as_str).collect();
        let _ = write!(out, "entity {id} {}", tags.join(","));
        if !decl.label.is_empty() {
            let _ = write!(out, " {}", decl.label);
        }
        out.push('\n');
    }
    out
}

/// Renders the fact set as tab-separated triples.
pub fn render_facts(kb: &KnowledgeBase) -> String {
    let mut out = format!("#format_version\t{FORMAT_VERSION}\n");
    for f in kb.facts() {
        let _ = writeln!(out, "{}\t{}\t{}", f.subject, f.relation, f.object);
    }
    out
}

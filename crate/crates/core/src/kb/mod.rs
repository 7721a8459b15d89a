//! In-memory typed knowledge graph.
//!
//! A [`KnowledgeBase`] holds a schema (a type hierarchy plus typed
//! relations), entities tagged with one or more types, and relational facts.
//! Type assertions are entity tags, not facts. Three indices are kept in
//! step with the fact set on every mutation: entity -> facts,
//! relation -> facts and type -> tagged entities.

mod literal;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use literal::{Literal, LiteralError, LiteralKind};
pub use text::{load_kb, render_facts, render_schema, FORMAT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Type,
    Relation,
    Entity,
    Fact,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Type => "type",
            ElementKind::Relation => "relation",
            ElementKind::Entity => "entity",
            ElementKind::Fact => "fact",
        })
    }
}

/// Object position of a fact.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    Entity(String),
    Literal(Literal),
}

impl Object {
    pub fn as_entity(&self) -> Option<&str> {
        match self {
            Object::Entity(id) => Some(id),
            Object::Literal(_) => None,
        }
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Object::Entity(id) => f.write_str(id),
            Object::Literal(lit) => lit.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub subject: String,
    pub relation: String,
    pub object: Object,
}

impl Fact {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: Object) -> Self {
        Fact {
            subject: subject.into(),
            relation: relation.into(),
            object,
        }
    }

    pub fn touches_entity(&self, entity: &str) -> bool {
        self.subject == entity || self.object.as_entity() == Some(entity)
    }

    /// Entity ids in subject or object position.
    pub fn entities(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.subject.as_str()).chain(self.object.as_entity())
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.relation, self.object)
    }
}

/// Reference to one element of a knowledge base.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRef {
    Type(String),
    Relation(String),
    Entity(String),
    Fact(Fact),
}

impl ElementRef {
    pub fn kind(&self) -> ElementKind {
        match self {
            ElementRef::Type(_) => ElementKind::Type,
            ElementRef::Relation(_) => ElementKind::Relation,
            ElementRef::Entity(_) => ElementKind::Entity,
            ElementRef::Fact(_) => ElementKind::Fact,
        }
    }

    /// Identifier string; facts use the tab-separated triple.
    pub fn id(&self) -> String {
        match self {
            ElementRef::Type(id) | ElementRef::Relation(id) | ElementRef::Entity(id) => id.clone(),
            ElementRef::Fact(f) => format!("{}\t{}\t{}", f.subject, f.relation, f.object),
        }
    }

    pub fn is_schema(&self) -> bool {
        matches!(self, ElementRef::Type(_) | ElementRef::Relation(_))
    }
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Fact(fact) => write!(f, "fact {fact}"),
            other => write!(f, "{} {}", other.kind(), other.id()),
        }
    }
}

/// Range of a relation: an entity type or a literal kind.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Range {
    Type(String),
    Literal(LiteralKind),
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Range::Type(t) => f.write_str(t),
            Range::Literal(k) => k.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDecl {
    pub parents: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationDecl {
    pub domain: String,
    pub range: Range,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityDecl {
    pub types: BTreeSet<String>,
    pub label: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbError {
    #[error("{source_name}:{line}: {message}")]
    Malformed {
        source_name: &'static str,
        line: usize,
        message: String,
    },
    #[error("{}dangling reference to {kind} `{id}` ({context})", line_prefix(*.line))]
    Dangling {
        line: Option<usize>,
        kind: ElementKind,
        id: String,
        context: String,
    },
    #[error("{}duplicate {kind} `{id}`", line_prefix(*.line))]
    Duplicate {
        line: Option<usize>,
        kind: ElementKind,
        id: String,
    },
    #[error("type hierarchy has a cycle through `{0}`")]
    CyclicHierarchy(String),
    #[error("{0} does not resolve in the knowledge base")]
    Unresolved(ElementRef),
    #[error("cannot drop type `{id}`: it still has subtypes {children:?}")]
    NonLeafType { id: String, children: Vec<String> },
    #[error("entity `{0}` must carry at least one type")]
    Untyped(String),
    #[error("fact {fact}: object does not match range `{range}` of its relation")]
    RangeMismatch { fact: Fact, range: Range },
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

/// Everything removed by one call to [`KnowledgeBase::apply_drop`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropCascade {
    pub root: ElementRef,
    pub removed_facts: Vec<Fact>,
    pub removed_entities: Vec<String>,
    pub removed_relations: Vec<String>,
    pub removed_types: Vec<String>,
    /// Entities that survived a type drop but lost that type tag.
    pub retagged_entities: Vec<String>,
}

impl DropCascade {
    fn new(root: ElementRef) -> Self {
        DropCascade {
            root,
            removed_facts: Vec::new(),
            removed_entities: Vec::new(),
            removed_relations: Vec::new(),
            removed_types: Vec::new(),
            retagged_entities: Vec::new(),
        }
    }

    /// All removed elements, the root included, as element references.
    pub fn removed_elements(&self) -> Vec<ElementRef> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.removed_types.iter().cloned().map(ElementRef::Type));
        out.extend(
            self.removed_relations
                .iter()
                .cloned()
                .map(ElementRef::Relation),
        );
        out.extend(
            self.removed_entities
                .iter()
                .cloned()
                .map(ElementRef::Entity),
        );
        out.extend(self.removed_facts.iter().cloned().map(ElementRef::Fact));
        out
    }

    pub fn len(&self) -> usize {
        self.removed_facts.len()
            + self.removed_entities.len()
            + self.removed_relations.len()
            + self.removed_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lookup indices derived from the fact set and entity tags.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Indices {
    pub facts_by_entity: BTreeMap<String, BTreeSet<Fact>>,
    pub facts_by_relation: BTreeMap<String, BTreeSet<Fact>>,
    pub entities_by_type: BTreeMap<String, BTreeSet<String>>,
    pub subtypes: BTreeMap<String, BTreeSet<String>>,
}

impl Indices {
    fn insert_fact(&mut self, fact: &Fact) {
        for e in fact.entities() {
            self.facts_by_entity
                .entry(e.to_string())
                .or_default()
                .insert(fact.clone());
        }
        self.facts_by_relation
            .entry(fact.relation.clone())
            .or_default()
            .insert(fact.clone());
    }

    fn remove_fact(&mut self, fact: &Fact) {
        for e in fact.entities() {
            remove_nested(&mut self.facts_by_entity, e, fact);
        }
        remove_nested(&mut self.facts_by_relation, &fact.relation, fact);
    }
}

fn remove_nested<T: Ord>(map: &mut BTreeMap<String, BTreeSet<T>>, key: &str, item: &T) {
    if let Some(set) = map.get_mut(key) {
        set.remove(item);
        if set.is_empty() {
            map.remove(key);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    types: BTreeMap<String, TypeDecl>,
    relations: BTreeMap<String, RelationDecl>,
    entities: BTreeMap<String, EntityDecl>,
    facts: BTreeSet<Fact>,
    indices: Indices,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn types(&self) -> &BTreeMap<String, TypeDecl> {
        &self.types
    }

    pub fn relations(&self) -> &BTreeMap<String, RelationDecl> {
        &self.relations
    }

    pub fn entities(&self) -> &BTreeMap<String, EntityDecl> {
        &self.entities
    }

    pub fn facts(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

    pub fn indices(&self) -> &Indices {
        &self.indices
    }

    pub fn has_type(&self, id: &str) -> bool {
        self.types.contains_key(id)
    }

    pub fn has_relation(&self, id: &str) -> bool {
        self.relations.contains_key(id)
    }

    pub fn has_entity(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn contains(&self, g: &ElementRef) -> bool {
        match g {
            ElementRef::Type(id) => self.has_type(id),
            ElementRef::Relation(id) => self.has_relation(id),
            ElementRef::Entity(id) => self.has_entity(id),
            ElementRef::Fact(f) => self.facts.contains(f),
        }
    }

    pub fn add_type<I, S>(&mut self, id: impl Into<String>, parents: I) -> Result<(), KbError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let id = id.into();
        if self.types.contains_key(&id) {
            return Err(KbError::Duplicate {
                line: None,
                kind: ElementKind::Type,
                id,
            });
        }
        let parents: BTreeSet<String> = parents.into_iter().map(Into::into).collect();
        for p in &parents {
            if !self.types.contains_key(p) {
                return Err(KbError::Dangling {
                    line: None,
                    kind: ElementKind::Type,
                    id: p.clone(),
                    context: format!("parent of type `{id}`"),
                });
            }
        }
        for p in &parents {
            self.indices
                .subtypes
                .entry(p.clone())
                .or_default()
                .insert(id.clone());
        }
        self.types.insert(id, TypeDecl { parents });
        Ok(())
    }

    pub fn add_relation(
        &mut self,
        id: impl Into<String>,
        domain: impl Into<String>,
        range: Range,
    ) -> Result<(), KbError> {
        let id = id.into();
        let domain = domain.into();
        if self.relations.contains_key(&id) {
            return Err(KbError::Duplicate {
                line: None,
                kind: ElementKind::Relation,
                id,
            });
        }
        let mut referenced = vec![domain.clone()];
        if let Range::Type(t) = &range {
            referenced.push(t.clone());
        }
        for t in referenced {
            if !self.types.contains_key(&t) {
                return Err(KbError::Dangling {
                    line: None,
                    kind: ElementKind::Type,
                    id: t,
                    context: format!("domain/range of relation `{id}`"),
                });
            }
        }
        self.relations.insert(id, RelationDecl { domain, range });
        Ok(())
    }

    pub fn add_entity<I, S>(
        &mut self,
        id: impl Into<String>,
        types: I,
        label: impl Into<String>,
    ) -> Result<(), KbError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let id = id.into();
        if self.entities.contains_key(&id) {
            return Err(KbError::Duplicate {
                line: None,
                kind: ElementKind::Entity,
                id,
            });
        }
        let types: BTreeSet<String> = types.into_iter().map(Into::into).collect();
        if types.is_empty() {
            return Err(KbError::Untyped(id));
        }
        for t in &types {
            if !self.types.contains_key(t) {
                return Err(KbError::Dangling {
                    line: None,
                    kind: ElementKind::Type,
                    id: t.clone(),
                    context: format!("tag of entity `{id}`"),
                });
            }
        }
        for t in &types {
            self.indices
                .entities_by_type
                .entry(t.clone())
                .or_default()
                .insert(id.clone());
        }
        self.entities.insert(
            id,
            EntityDecl {
                types,
                label: label.into(),
            },
        );
        Ok(())
    }

    /// Adds a fact; returns `false` if it was already present.
    pub fn add_fact(&mut self, fact: Fact) -> Result<bool, KbError> {
        let decl = self
            .relations
            .get(&fact.relation)
            .ok_or_else(|| KbError::Dangling {
                line: None,
                kind: ElementKind::Relation,
                id: fact.relation.clone(),
                context: "fact relation".into(),
            })?;
        let range_ok = match (&decl.range, &fact.object) {
            (Range::Type(_), Object::Entity(_)) => true,
            (Range::Literal(k), Object::Literal(l)) => *k == l.kind(),
            _ => false,
        };
        if !range_ok {
            return Err(KbError::RangeMismatch {
                range: decl.range.clone(),
                fact,
            });
        }
        for e in fact.entities() {
            if !self.entities.contains_key(e) {
                return Err(KbError::Dangling {
                    line: None,
                    kind: ElementKind::Entity,
                    id: e.to_string(),
                    context: "fact argument".into(),
                });
            }
        }
        if self.facts.contains(&fact) {
            return Ok(false);
        }
        self.indices.insert_fact(&fact);
        self.facts.insert(fact);
        Ok(true)
    }

    /// The type itself plus every transitive subtype.
    pub fn descendants(&self, type_id: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![type_id.to_string()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.clone()) {
                continue;
            }
            if let Some(children) = self.indices.subtypes.get(&t) {
                stack.extend(children.iter().cloned());
            }
        }
        seen
    }

    /// Entities tagged with the type or any of its descendants.
    pub fn instances_of(&self, type_id: &str) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for t in self.descendants(type_id) {
            if let Some(es) = self.indices.entities_by_type.get(&t) {
                out.extend(es.iter().map(String::as_str));
            }
        }
        out
    }

    pub fn facts_of_entity(&self, entity: &str) -> impl Iterator<Item = &Fact> {
        self.indices
            .facts_by_entity
            .get(entity)
            .into_iter()
            .flatten()
    }

    pub fn facts_of_relation(&self, relation: &str) -> impl Iterator<Item = &Fact> {
        self.indices
            .facts_by_relation
            .get(relation)
            .into_iter()
            .flatten()
    }

    pub fn is_leaf_type(&self, type_id: &str) -> bool {
        self.indices
            .subtypes
            .get(type_id)
            .is_none_or(BTreeSet::is_empty)
    }

    /// Popularity of an element, read from this (ideal) knowledge base.
    ///
    /// Facts and entities count 1. A relation counts its facts. A type counts
    /// the facts whose subject or object is tagged with it or a descendant.
    pub fn popularity(&self, g: &ElementRef) -> Result<usize, KbError> {
        if !self.contains(g) {
            return Err(KbError::Unresolved(g.clone()));
        }
        Ok(match g {
            ElementRef::Fact(_) | ElementRef::Entity(_) => 1,
            ElementRef::Relation(r) => self.facts_of_relation(r).count(),
            ElementRef::Type(t) => {
                let mut facts: BTreeSet<&Fact> = BTreeSet::new();
                for e in self.instances_of(t) {
                    facts.extend(self.facts_of_entity(e));
                }
                facts.len()
            }
        })
    }

    /// Computes what [`apply_drop`](Self::apply_drop) would remove without
    /// mutating anything.
    pub fn cascade_of(&self, g: &ElementRef) -> Result<DropCascade, KbError> {
        if !self.contains(g) {
            return Err(KbError::Unresolved(g.clone()));
        }
        let mut cascade = DropCascade::new(g.clone());
        match g {
            ElementRef::Fact(f) => cascade.removed_facts.push(f.clone()),
            ElementRef::Entity(e) => {
                cascade
                    .removed_facts
                    .extend(self.facts_of_entity(e).cloned());
                cascade.removed_entities.push(e.clone());
            }
            ElementRef::Relation(r) => {
                cascade
                    .removed_facts
                    .extend(self.facts_of_relation(r).cloned());
                cascade.removed_relations.push(r.clone());
            }
            ElementRef::Type(t) => {
                if let Some(children) = self.indices.subtypes.get(t).filter(|c| !c.is_empty()) {
                    return Err(KbError::NonLeafType {
                        id: t.clone(),
                        children: children.iter().cloned().collect(),
                    });
                }
                let mut facts = BTreeSet::new();
                for e in self.indices.entities_by_type.get(t).into_iter().flatten() {
                    let decl = &self.entities[e];
                    if decl.types.len() == 1 {
                        facts.extend(self.facts_of_entity(e).cloned());
                        cascade.removed_entities.push(e.clone());
                    } else {
                        cascade.retagged_entities.push(e.clone());
                    }
                }
                for (r, decl) in &self.relations {
                    if decl.domain == *t || decl.range == Range::Type(t.clone()) {
                        facts.extend(self.facts_of_relation(r).cloned());
                        cascade.removed_relations.push(r.clone());
                    }
                }
                cascade.removed_facts.extend(facts);
                cascade.removed_types.push(t.clone());
            }
        }
        Ok(cascade)
    }

    /// Removes `g` together with everything that depends on it.
    ///
    /// Entities drop their facts, relations drop their facts, and a leaf type
    /// drops its relations, the entities tagged only with it, and the facts
    /// of both. Entities carrying other types keep them. Dropping a type
    /// that still has subtypes is rejected.
    pub fn apply_drop(&mut self, g: &ElementRef) -> Result<DropCascade, KbError> {
        let cascade = self.cascade_of(g)?;
        for f in &cascade.removed_facts {
            self.indices.remove_fact(f);
            self.facts.remove(f);
        }
        for e in &cascade.removed_entities {
            if let Some(decl) = self.entities.remove(e) {
                for t in &decl.types {
                    remove_nested(&mut self.indices.entities_by_type, t, e);
                }
            }
        }
        for r in &cascade.removed_relations {
            self.relations.remove(r);
        }
        for t in &cascade.removed_types {
            for e in &cascade.retagged_entities {
                if let Some(decl) = self.entities.get_mut(e) {
                    decl.types.remove(t);
                }
            }
            self.indices.entities_by_type.remove(t);
            self.indices.subtypes.remove(t);
            if let Some(decl) = self.types.remove(t) {
                for p in &decl.parents {
                    remove_nested(&mut self.indices.subtypes, p, t);
                }
            }
        }
        Ok(cascade)
    }

    /// Indices recomputed from scratch from the current contents.
    pub fn rebuilt_indices(&self) -> Indices {
        let mut idx = Indices::default();
        for (id, decl) in &self.types {
            for p in &decl.parents {
                idx.subtypes
                    .entry(p.clone())
                    .or_default()
                    .insert(id.clone());
            }
        }
        for (id, decl) in &self.entities {
            for t in &decl.types {
                idx.entities_by_type
                    .entry(t.clone())
                    .or_default()
                    .insert(id.clone());
            }
        }
        for f in &self.facts {
            idx.insert_fact(f);
        }
        idx
    }

    /// Checks every structural invariant and returns all violations found.
    pub fn check_invariants(&self) -> Vec<KbError> {
        let mut errors = Vec::new();
        let dangling = |kind, id: &str, context: String| KbError::Dangling {
            line: None,
            kind,
            id: id.to_string(),
            context,
        };
        for (id, decl) in &self.types {
            for p in &decl.parents {
                if !self.types.contains_key(p) {
                    errors.push(dangling(ElementKind::Type, p, format!("parent of `{id}`")));
                }
            }
        }
        if let Some(t) = self.find_cycle() {
            errors.push(KbError::CyclicHierarchy(t));
        }
        for (id, decl) in &self.relations {
            if !self.types.contains_key(&decl.domain) {
                errors.push(dangling(
                    ElementKind::Type,
                    &decl.domain,
                    format!("domain of `{id}`"),
                ));
            }
            if let Range::Type(t) = &decl.range {
                if !self.types.contains_key(t) {
                    errors.push(dangling(ElementKind::Type, t, format!("range of `{id}`")));
                }
            }
        }
        for (id, decl) in &self.entities {
            if decl.types.is_empty() {
                errors.push(KbError::Untyped(id.clone()));
            }
            for t in &decl.types {
                if !self.types.contains_key(t) {
                    errors.push(dangling(ElementKind::Type, t, format!("tag of `{id}`")));
                }
            }
        }
        for f in &self.facts {
            if !self.relations.contains_key(&f.relation) {
                errors.push(dangling(
                    ElementKind::Relation,
                    &f.relation,
                    format!("fact {f}"),
                ));
            }
            for e in f.entities() {
                if !self.entities.contains_key(e) {
                    errors.push(dangling(ElementKind::Entity, e, format!("fact {f}")));
                }
            }
        }
        errors
    }

    fn find_cycle(&self) -> Option<String> {
        find_type_cycle(self.types.iter().map(|(id, d)| (id.as_str(), &d.parents)))
    }
}

/// Returns a type on a parent cycle, if any.
pub(crate) fn find_type_cycle<'a, I>(types: I) -> Option<String>
where
    I: IntoIterator<Item = (&'a str, &'a BTreeSet<String>)>,
{
    let parents: BTreeMap<&str, &BTreeSet<String>> = types.into_iter().collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    for &start in parents.keys() {
        if state.get(start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(&str, Vec<&str>)> = Vec::new();
        state.insert(start, 1);
        let next = |t: &str| -> Vec<&str> {
            parents
                .get(t)
                .map(|ps| ps.iter().map(String::as_str).collect())
                .unwrap_or_default()
        };
        stack.push((start, next(start)));
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            match top.1.pop() {
                Some(p) => match state.get(p).copied().unwrap_or(0) {
                    1 => return Some(p.to_string()),
                    0 => {
                        state.insert(p, 1);
                        stack.push((p, next(p)));
                    }
                    _ => {}
                },
                None => {
                    state.insert(node, 2);
                    stack.pop();
                }
            }
        }
    }
    None
}

#[cfg(test)]
pub(crate) mod tests;

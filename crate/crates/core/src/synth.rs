//! Seeded generators for small random knowledge bases and well-typed
//! logical forms, used by property tests and the executor cross-check.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kb::{Fact, KnowledgeBase, Literal, LiteralKind, Object, Range};
use crate::sexpr::{Comparator, Expr, Extremum, LogicalForm, RelationTerm};

#[derive(Clone, Debug)]
pub struct KbParams {
    pub types: usize,
    pub relations: usize,
    pub max_entities: usize,
    pub facts: usize,
}

impl Default for KbParams {
    fn default() -> Self {
        KbParams {
            types: 5,
            relations: 7,
            max_entities: 30,
            facts: 70,
        }
    }
}

fn random_literal(kind: LiteralKind, rng: &mut impl Rng) -> Literal {
    let lexical = match kind {
        LiteralKind::Integer => rng.gen_range(0..20).to_string(),
        LiteralKind::Float => format!("{:.1}", rng.gen_range(0..40) as f64 / 4.0),
        LiteralKind::Date => format!("{}-{:02}", rng.gen_range(1990..1996), rng.gen_range(1..13)),
        LiteralKind::String => format!("s{}", rng.gen_range(0..5)),
    };
    Literal::new(lexical, kind).expect("generated literal is well-formed")
}

/// Builds a random knowledge base. Ids are `t<i>`, `r<i>` and `e<i>`.
pub fn random_kb(seed: u64, params: &KbParams) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kb = KnowledgeBase::new();
    let types: Vec<String> = (0..params.types.max(1)).map(|i| format!("t{i}")).collect();
    for (i, t) in types.iter().enumerate() {
        let mut parents = Vec::new();
        if i > 0 && rng.gen_bool(0.5) {
            parents.push(types[rng.gen_range(0..i)].clone());
            if i > 1 && rng.gen_bool(0.2) {
                parents.push(types[rng.gen_range(0..i)].clone());
            }
        }
        kb.add_type(t.clone(), parents)
            .expect("parents precede children");
    }
    let kinds = [
        LiteralKind::Integer,
        LiteralKind::Float,
        LiteralKind::Date,
        LiteralKind::String,
    ];
    for i in 0..params.relations {
        let domain = types.choose(&mut rng).unwrap().clone();
        let range = if rng.gen_bool(0.65) {
            Range::Type(types.choose(&mut rng).unwrap().clone())
        } else {
            Range::Literal(*kinds.choose(&mut rng).unwrap())
        };
        kb.add_relation(format!("r{i}"), domain, range)
            .expect("types exist");
    }
    let n_entities = rng.gen_range(1..=params.max_entities.max(1));
    for i in 0..n_entities {
        let n_tags = if rng.gen_bool(0.3) { 2 } else { 1 };
        let tags: Vec<String> = types.choose_multiple(&mut rng, n_tags).cloned().collect();
        kb.add_entity(format!("e{i}"), tags, "")
            .expect("types exist");
    }
    let entities: Vec<String> = kb.entities().keys().cloned().collect();
    let relations: Vec<(String, Range)> = kb
        .relations()
        .iter()
        .map(|(id, d)| (id.clone(), d.range.clone()))
        .collect();
    for _ in 0..params.facts {
        let (rel, range) = relations.choose(&mut rng).unwrap();
        let subject = entities.choose(&mut rng).unwrap().clone();
        let object = match range {
            Range::Type(_) => Object::Entity(entities.choose(&mut rng).unwrap().clone()),
            Range::Literal(kind) => Object::Literal(random_literal(*kind, &mut rng)),
        };
        kb.add_fact(Fact::new(subject, rel.clone(), object))
            .expect("well-formed fact");
    }
    kb
}

/// Generates well-typed logical forms of bounded depth over a knowledge base.
///
/// Bare entity atoms appear only as `JOIN` targets, type atoms everywhere
/// else, so every generated form survives a render/parse round trip.
/// Extremum and comparative operators only use forward relations with
/// numeric or date ranges, so execution never fails.
pub struct LfGenerator<'a> {
    kb: &'a KnowledgeBase,
    types: Vec<&'a str>,
    entities: Vec<&'a str>,
    relations: Vec<&'a str>,
    ordered_relations: Vec<(&'a str, LiteralKind)>,
}

impl<'a> LfGenerator<'a> {
    pub fn new(kb: &'a KnowledgeBase) -> Self {
        let ordered_relations = kb
            .relations()
            .iter()
            .filter_map(|(id, d)| match d.range {
                Range::Literal(k) if k != LiteralKind::String => Some((id.as_str(), k)),
                _ => None,
            })
            .collect();
        LfGenerator {
            kb,
            types: kb.types().keys().map(String::as_str).collect(),
            entities: kb.entities().keys().map(String::as_str).collect(),
            relations: kb.relations().keys().map(String::as_str).collect(),
            ordered_relations,
        }
    }

    pub fn generate(&self, max_depth: usize, rng: &mut impl Rng) -> LogicalForm {
        let depth = max_depth.max(1);
        let root = if depth >= 2 && rng.gen_bool(0.15) {
            Expr::Count(Box::new(self.expr(depth - 1, rng)))
        } else {
            self.expr(depth, rng)
        };
        LogicalForm::new(root)
    }

    fn relation(&self, rng: &mut impl Rng) -> RelationTerm {
        let r = *self
            .relations
            .choose(rng)
            .expect("knowledge base has relations");
        RelationTerm {
            relation: r.to_string(),
            inverted: rng.gen_bool(0.3),
        }
    }

    fn join_target(&self, depth: usize, rel: &RelationTerm, rng: &mut impl Rng) -> Expr {
        if depth > 1 && rng.gen_bool(0.5) {
            // a bare type here would read back as an entity
            let inner = self.expr(depth, rng);
            if !matches!(inner, Expr::Type(_)) {
                return inner;
            }
        }
        let literal_kind = match &self.kb.relations()[&rel.relation].range {
            Range::Literal(k) if !rel.inverted => Some(*k),
            _ => None,
        };
        match literal_kind {
            Some(kind) => Expr::Literal(random_literal(kind, rng)),
            None => match self.entities.choose(rng) {
                Some(e) => Expr::Entity(e.to_string()),
                None => self.type_atom(rng),
            },
        }
    }

    fn type_atom(&self, rng: &mut impl Rng) -> Expr {
        Expr::Type(
            self.types
                .choose(rng)
                .expect("knowledge base has types")
                .to_string(),
        )
    }

    fn expr(&self, depth: usize, rng: &mut impl Rng) -> Expr {
        if depth <= 1 {
            return match self.ordered_relations.choose(rng) {
                Some(&(r, kind)) if rng.gen_bool(0.25) => {
                    let cmp = *Comparator::ALL.choose(rng).unwrap();
                    Expr::Compare(cmp, RelationTerm::forward(r), random_literal(kind, rng))
                }
                _ => self.type_atom(rng),
            };
        }
        match rng.gen_range(0..10) {
            0..=2 => Expr::And(
                Box::new(self.expr(depth - 1, rng)),
                Box::new(self.expr(depth - 1, rng)),
            ),
            3..=7 => {
                let rel = self.relation(rng);
                let target = self.join_target(depth - 1, &rel, rng);
                Expr::Join(rel, Box::new(target))
            }
            8 if !self.ordered_relations.is_empty() => {
                let &(r, _) = self.ordered_relations.choose(rng).unwrap();
                let ext = if rng.gen_bool(0.5) {
                    Extremum::Max
                } else {
                    Extremum::Min
                };
                Expr::Arg(
                    ext,
                    Box::new(self.expr(depth - 1, rng)),
                    RelationTerm::forward(r),
                )
            }
            _ => self.expr(1, rng),
        }
    }
}

/// Generates `n` answerable questions over `kb`, skipping forms whose
/// answers are empty. Gives up after `50 * n` attempts.
pub fn random_corpus(
    kb: &KnowledgeBase,
    n: usize,
    max_depth: usize,
    seed: u64,
) -> Vec<crate::dataset::QuestionRecord> {
    let gen = LfGenerator::new(kb);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..50 * n {
        if out.len() == n {
            break;
        }
        let lf = gen.generate(max_depth, &mut rng);
        let Ok(exec) = crate::sexpr::execute(&lf, kb) else {
            continue;
        };
        if exec.is_empty() {
            continue;
        }
        let qid = format!("q{}", out.len());
        out.push(crate::dataset::QuestionRecord::answerable(
            qid,
            lf.to_string(),
            lf,
            exec.answers,
        ));
    }
    out
}

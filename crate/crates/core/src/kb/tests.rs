use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::toy;

fn lit(v: &str, k: LiteralKind) -> Object {
    Object::Literal(Literal::new(v, k).unwrap())
}

#[test]
fn toy_fixture_counts() {
    let kb = toy::knowledge_base();
    // counted from the fixture text: 3 type lines, 3 relation lines, 5 entity lines, 7 fact rows
    let count = |prefix: &str| {
        toy::SCHEMA
            .lines()
            .filter(|l| l.starts_with(prefix))
            .count()
    };
    let fact_rows = toy::FACTS.lines().filter(|l| !l.trim().is_empty()).count();
    assert_eq!(
        (
            count("type "),
            count("relation "),
            count("entity "),
            fact_rows
        ),
        (3, 3, 5, 7)
    );
    assert_eq!(kb.types().len(), 3);
    assert_eq!(kb.relations().len(), 3);
    assert_eq!(kb.entities().len(), 5);
    assert_eq!(kb.facts().len(), 7);
    assert_eq!(kb.rebuilt_indices(), *kb.indices());
}

#[test]
fn empty_facts_file_loads() {
    let kb = load_kb(toy::SCHEMA, "").unwrap();
    assert!(kb.facts().is_empty());
    assert_eq!(kb.entities().len(), 5);
}

#[test]
fn undeclared_relation_is_dangling() {
    let err = load_kb(toy::SCHEMA, "a1\tmentors\ta2\n").unwrap_err();
    match err {
        KbError::Dangling { line, kind, id, .. } => {
            assert_eq!(
                (line, kind, id.as_str()),
                (Some(1), ElementKind::Relation, "mentors")
            );
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_fact_line_reports_line_number() {
    let facts = "a1\tworks_at\to1\na2 works_at o1\n";
    let err = load_kb(toy::SCHEMA, facts).unwrap_err();
    assert!(matches!(err, KbError::Malformed { line: 2, .. }), "{err}");
    assert!(err.to_string().contains(":2:"));
}

#[test]
fn bad_literal_and_range_mismatch_rejected() {
    let err = load_kb(toy::SCHEMA, "o1\tfounded_year\t\"soon\"^^date\n").unwrap_err();
    assert!(matches!(err, KbError::Malformed { line: 1, .. }));
    let err = load_kb(toy::SCHEMA, "o1\tfounded_year\ta1\n").unwrap_err();
    assert!(matches!(err, KbError::Malformed { line: 1, .. }));
}

#[test]
fn cyclic_hierarchy_rejected() {
    let schema = "type a b\ntype b c\ntype c a\n";
    assert!(matches!(
        load_kb(schema, ""),
        Err(KbError::CyclicHierarchy(_))
    ));
    let schema = "type a a\n";
    assert!(matches!(
        load_kb(schema, ""),
        Err(KbError::CyclicHierarchy(_))
    ));
}

#[test]
fn dangling_schema_references() {
    assert!(matches!(
        load_kb("type a missing\n", ""),
        Err(KbError::Dangling { line: Some(1), .. })
    ));
    assert!(matches!(
        load_kb("type a\nrelation r a nowhere\n", ""),
        Err(KbError::Dangling { line: Some(2), .. })
    ));
    assert!(matches!(
        load_kb("type a\nentity e a,b\n", ""),
        Err(KbError::Dangling { line: Some(2), .. })
    ));
}

#[test]
fn schema_roundtrips_through_text() {
    let kb = toy::knowledge_base();
    let again = load_kb(&render_schema(&kb), &render_facts(&kb)).unwrap();
    assert_eq!(kb, again);
}

fn brute_type_popularity(kb: &KnowledgeBase, t: &str) -> usize {
    // closure over parents, computed independently of the subtype index
    let is_sub = |mut cur: BTreeSet<String>| {
        let mut changed = true;
        while changed {
            changed = false;
            for (id, decl) in kb.types() {
                if !cur.contains(id) && decl.parents.iter().any(|p| cur.contains(p)) {
                    cur.insert(id.clone());
                    changed = true;
                }
            }
        }
        cur
    };
    let family = is_sub(BTreeSet::from([t.to_string()]));
    kb.facts()
        .iter()
        .filter(|f| {
            f.entities().any(|e| {
                kb.entities()[e]
                    .types
                    .iter()
                    .any(|tag| family.contains(tag))
            })
        })
        .count()
}

#[test]
fn popularity_values() {
    let kb = toy::knowledge_base();
    let fact = Fact::new("a1", "works_at", Object::Entity("o1".into()));
    assert_eq!(kb.popularity(&ElementRef::Fact(fact)).unwrap(), 1);
    assert_eq!(kb.popularity(&ElementRef::Entity("o2".into())).unwrap(), 1);
    let works_at = kb
        .facts()
        .iter()
        .filter(|f| f.relation == "works_at")
        .count();
    assert_eq!(works_at, 3);
    assert_eq!(
        kb.popularity(&ElementRef::Relation("works_at".into()))
            .unwrap(),
        works_at
    );
    // 3 works_at + 2 advises touch a person or researcher; founded_year facts do not
    assert_eq!(brute_type_popularity(&kb, "person"), 5);
    assert_eq!(
        kb.popularity(&ElementRef::Type("person".into())).unwrap(),
        5
    );
    assert_eq!(kb.popularity(&ElementRef::Type("org".into())).unwrap(), 5);
    assert_eq!(
        kb.popularity(&ElementRef::Type("researcher".into()))
            .unwrap(),
        4
    );
    assert!(kb.popularity(&ElementRef::Type("city".into())).is_err());
}

#[test]
fn fact_drop_has_no_further_cascade() {
    let mut kb = toy::knowledge_base();
    let fact = Fact::new("a1", "works_at", Object::Entity("o1".into()));
    let cascade = kb.apply_drop(&ElementRef::Fact(fact.clone())).unwrap();
    assert_eq!(cascade.removed_facts, vec![fact.clone()]);
    assert!(cascade.removed_entities.is_empty());
    assert!(cascade.removed_relations.is_empty());
    assert!(cascade.removed_types.is_empty());
    assert!(!kb.facts().contains(&fact));
    assert!(kb.apply_drop(&ElementRef::Fact(fact)).is_err());
}

#[test]
fn entity_drop_removes_touching_facts() {
    let mut kb = toy::knowledge_base();
    let touching: Vec<Fact> = kb
        .facts()
        .iter()
        .filter(|f| f.touches_entity("o2"))
        .cloned()
        .collect();
    assert_eq!(
        touching,
        vec![Fact::new(
            "o2",
            "founded_year",
            lit("2005", LiteralKind::Date)
        )]
    );
    let cascade = kb.apply_drop(&ElementRef::Entity("o2".into())).unwrap();
    assert_eq!(cascade.removed_entities, vec!["o2".to_string()]);
    assert_eq!(cascade.removed_facts, touching);
    assert!(!kb.has_entity("o2"));
    assert_eq!(kb.facts().len(), 6);
    assert!(kb.check_invariants().is_empty());
}

#[test]
fn relation_drop_removes_its_facts() {
    let mut kb = toy::knowledge_base();
    let cascade = kb
        .apply_drop(&ElementRef::Relation("advises".into()))
        .unwrap();
    assert_eq!(cascade.removed_facts.len(), 2);
    assert_eq!(cascade.removed_relations, vec!["advises".to_string()]);
    assert!(!kb.has_relation("advises"));
}

#[test]
fn type_drop_cascades() {
    let mut kb = toy::knowledge_base();
    let cascade = kb.apply_drop(&ElementRef::Type("org".into())).unwrap();
    let rels: BTreeSet<&str> = cascade
        .removed_relations
        .iter()
        .map(String::as_str)
        .collect();
    assert_eq!(rels, BTreeSet::from(["founded_year", "works_at"]));
    let ents: BTreeSet<&str> = cascade
        .removed_entities
        .iter()
        .map(String::as_str)
        .collect();
    assert_eq!(ents, BTreeSet::from(["o1", "o2"]));
    assert_eq!(cascade.removed_facts.len(), 5);
    assert_eq!(cascade.removed_types, vec!["org".to_string()]);
    assert_eq!(kb.facts().len(), 2);
    assert!(kb.check_invariants().is_empty());
    assert_eq!(kb.rebuilt_indices(), *kb.indices());
}

#[test]
fn leaf_type_drop_preserves_multi_typed_entities() {
    let mut kb = toy::knowledge_base();
    let cascade = kb
        .apply_drop(&ElementRef::Type("researcher".into()))
        .unwrap();
    assert!(cascade.removed_entities.is_empty());
    assert_eq!(
        cascade.retagged_entities,
        vec!["a1".to_string(), "a2".to_string()]
    );
    assert_eq!(cascade.removed_relations, vec!["advises".to_string()]);
    assert_eq!(
        kb.entities()["a1"].types,
        BTreeSet::from(["person".to_string()])
    );
    assert!(kb.is_leaf_type("person"));
    assert_eq!(kb.rebuilt_indices(), *kb.indices());
}

#[test]
fn non_leaf_type_drop_rejected() {
    let mut kb = toy::knowledge_base();
    let before = kb.clone();
    let err = kb
        .apply_drop(&ElementRef::Type("person".into()))
        .unwrap_err();
    assert!(matches!(err, KbError::NonLeafType { .. }));
    assert_eq!(kb, before);
}

fn random_kb_strategy() -> impl Strategy<Value = KnowledgeBase> {
    any::<u64>().prop_map(|seed| crate::synth::random_kb(seed, &crate::synth::KbParams::default()))
}

fn all_elements(kb: &KnowledgeBase) -> Vec<ElementRef> {
    let mut out: Vec<ElementRef> = Vec::new();
    out.extend(kb.types().keys().cloned().map(ElementRef::Type));
    out.extend(kb.relations().keys().cloned().map(ElementRef::Relation));
    out.extend(kb.entities().keys().cloned().map(ElementRef::Entity));
    out.extend(kb.facts().iter().cloned().map(ElementRef::Fact));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_drop_sequences_keep_invariants(kb in random_kb_strategy(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..12)) {
        let ideal = kb.clone();
        let mut kb = kb;
        for pick in picks {
            let candidates = all_elements(&kb);
            if candidates.is_empty() {
                break;
            }
            let g = pick.get(&candidates).clone();
            let before = (kb.facts().len(), kb.entities().len(), kb.relations().len(), kb.types().len());
            match kb.apply_drop(&g) {
                Ok(cascade) => {
                    for removed in cascade.removed_elements() {
                        prop_assert!(!kb.contains(&removed));
                        prop_assert!(ideal.contains(&removed));
                    }
                }
                Err(KbError::NonLeafType { .. }) => prop_assert!(matches!(g, ElementRef::Type(_))),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
            let after = (kb.facts().len(), kb.entities().len(), kb.relations().len(), kb.types().len());
            prop_assert!(after.0 <= before.0 && after.1 <= before.1 && after.2 <= before.2 && after.3 <= before.3);
            prop_assert_eq!(kb.rebuilt_indices(), kb.indices().clone());
            prop_assert!(kb.check_invariants().is_empty());
        }
    }
}

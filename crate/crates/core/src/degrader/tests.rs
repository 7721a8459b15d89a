use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::kb::{load_kb, Literal, LiteralKind, Object};
use crate::sexpr::parse;
use crate::toy;

fn record(kb: &KnowledgeBase, qid: &str, text: &str) -> QuestionRecord {
    let lf = parse(text).unwrap();
    let answers = execute(&lf, kb).unwrap().answers;
    QuestionRecord::answerable(qid, text, lf, answers)
}

const TOY_QUESTIONS: [(&str, &str); 5] = [
    ("staff", "(AND researcher (JOIN works_at o1))"),
    ("advisor_of_a3", "(JOIN advises a3)"),
    ("o1_staff", "(JOIN works_at o1)"),
    ("advisee_of_a2", "(JOIN (R advises) a2)"),
    ("o1_year", "(JOIN (R founded_year) o1)"),
];

fn toy_state() -> DegradeState {
    let kb = toy::knowledge_base();
    let qs = TOY_QUESTIONS
        .iter()
        .map(|(q, t)| record(&kb, q, t))
        .collect();
    DegradeState::new(kb, qs).unwrap()
}

fn fact(s: &str, r: &str, o: &str) -> Fact {
    Fact::new(s, r, Object::Entity(o.into()))
}

fn entity_answers(ids: &[&str]) -> AnswerLabel {
    AnswerLabel::Set(ids.iter().map(|e| Answer::Entity(e.to_string())).collect())
}

fn by_qid<'a>(state: &'a DegradeState, qid: &str) -> &'a QuestionRecord {
    state.questions().iter().find(|q| q.qid == qid).unwrap()
}

#[test]
fn importance_counts_forms_paths_and_answers() {
    let state = toy_state();
    // a3 is cited by one form and reached through the paths of two more
    assert_eq!(
        state.importance(&ElementRef::Entity("a3".into())).unwrap(),
        3
    );
    let o2_year = Fact::new(
        "o2",
        "founded_year",
        Object::Literal(Literal::new("2005", LiteralKind::Date).unwrap()),
    );
    assert_eq!(state.importance(&ElementRef::Fact(o2_year)).unwrap(), 0);
    assert_eq!(
        state.importance(&ElementRef::Entity("o2".into())).unwrap(),
        0
    );
    assert!(state
        .importance(&ElementRef::Entity("nobody".into()))
        .is_err());
}

#[test]
fn importance_shrinks_once_questions_turn_unanswerable() {
    let mut state = toy_state();
    let a3 = ElementRef::Entity("a3".into());
    let before = state.importance(&a3).unwrap();
    let newly = state
        .apply_labeled_drop(
            &ElementRef::Fact(fact("a2", "advises", "a3")),
            Cause::FactDrop,
        )
        .unwrap();
    assert_eq!(
        newly,
        vec!["advisor_of_a3".to_string(), "advisee_of_a2".to_string()]
    );
    let after = state.importance(&a3).unwrap();
    assert!(after <= before);
    assert_eq!(after, 1);
}

#[test]
fn partial_then_full_fact_drop() {
    let mut state = toy_state();
    assert_eq!(
        by_qid(&state, "staff").current_answers,
        entity_answers(&["a1", "a2"])
    );
    let newly = state
        .apply_labeled_drop(
            &ElementRef::Fact(fact("a2", "works_at", "o1")),
            Cause::FactDrop,
        )
        .unwrap();
    assert!(newly.is_empty());
    let q = by_qid(&state, "staff");
    assert_eq!(q.current_answers, entity_answers(&["a1"]));
    assert_eq!(q.status, Status::Answerable);

    let newly = state
        .apply_labeled_drop(
            &ElementRef::Fact(fact("a1", "works_at", "o1")),
            Cause::FactDrop,
        )
        .unwrap();
    assert_eq!(newly, vec!["staff".to_string()]);
    let q = by_qid(&state, "staff");
    assert_eq!(q.current_answers, AnswerLabel::Na);
    assert_eq!(q.current_lf, LfLabel::Form(q.ideal_lf.clone()));
    assert_eq!(q.causes, vec![Cause::FactDrop]);
    assert!(state.audit().is_empty());
}

#[test]
fn entity_cited_by_form_gives_nk() {
    let kb = toy::knowledge_base();
    let qs = vec![record(&kb, "o2_year", "(JOIN (R founded_year) o2)")];
    let mut state = DegradeState::new(kb, qs).unwrap();
    let newly = state
        .apply_labeled_drop(&ElementRef::Entity("o2".into()), Cause::EntityDrop)
        .unwrap();
    assert_eq!(newly, vec!["o2_year".to_string()]);
    let q = &state.questions()[0];
    assert_eq!(
        (q.current_lf.clone(), q.current_answers.clone()),
        (LfLabel::Nk, AnswerLabel::Na)
    );
    assert_eq!(q.causes, vec![Cause::EntityDrop]);
}

#[test]
fn type_drop_labels_cascaded_questions_with_type_cause() {
    let mut state = toy_state();
    let newly: BTreeSet<String> = state
        .apply_labeled_drop(&ElementRef::Type("org".into()), Cause::TypeDrop)
        .unwrap()
        .into_iter()
        .collect();
    let expected: BTreeSet<String> = ["staff", "o1_staff", "o1_year"].map(String::from).into();
    assert_eq!(newly, expected);
    for qid in &expected {
        let q = by_qid(&state, qid);
        assert!(q.current_lf.is_nk());
        assert_eq!(q.causes, vec![Cause::TypeDrop]);
    }
    assert!(by_qid(&state, "advisor_of_a3").is_answerable());
    assert!(state.audit().is_empty());
}

#[test]
fn later_hits_accumulate_causes_and_upgrade_to_nk() {
    let mut state = toy_state();
    let year = Fact::new(
        "o1",
        "founded_year",
        Object::Literal(Literal::new("1990", LiteralKind::Date).unwrap()),
    );
    state
        .apply_labeled_drop(&ElementRef::Fact(year), Cause::FactDrop)
        .unwrap();
    assert!(!by_qid(&state, "o1_year").current_lf.is_nk());
    state
        .apply_labeled_drop(&ElementRef::Entity("o1".into()), Cause::EntityDrop)
        .unwrap();
    let q = by_qid(&state, "o1_year");
    assert!(q.current_lf.is_nk());
    assert_eq!(q.causes, vec![Cause::FactDrop, Cause::EntityDrop]);
    assert_eq!(q.primary_cause(), Some(Cause::FactDrop));
    assert!(state.audit().is_empty());
}

#[test]
fn cause_must_match_element_kind() {
    let mut state = toy_state();
    let err = state
        .apply_labeled_drop(&ElementRef::Relation("advises".into()), Cause::TypeDrop)
        .unwrap_err();
    assert!(matches!(err, DegradeError::CauseMismatch { .. }));
    assert_eq!(state.kb(), state.ideal_kb());
}

fn two_relation_state() -> DegradeState {
    let mut schema =
        String::from("type x\nrelation big x x\nrelation small x x\nentity e1 x\nentity e2 x\n");
    let mut facts = String::new();
    for i in 0..10 {
        schema.push_str(&format!("entity s{i} x\n"));
        facts.push_str(&format!("s{i}\tbig\te{}\n", 1 + i / 5));
    }
    facts.push_str("s0\tsmall\te1\n");
    let kb = load_kb(&schema, &facts).unwrap();
    let qs = vec![
        record(&kb, "b1", "(JOIN big e1)"),
        record(&kb, "b2", "(JOIN big e2)"),
        record(&kb, "s1", "(JOIN small e1)"),
        record(&kb, "s2", "(COUNT (JOIN small e1))"),
    ];
    DegradeState::new(kb, qs).unwrap()
}

#[test]
fn sampling_odds_follow_importance_over_popularity() {
    let state = two_relation_state();
    let big = ElementRef::Relation("big".into());
    let small = ElementRef::Relation("small".into());
    assert_eq!(state.ideal_kb().popularity(&big).unwrap(), 10);
    assert_eq!(state.ideal_kb().popularity(&small).unwrap(), 1);
    assert_eq!(state.importance(&big).unwrap(), 2);
    assert_eq!(state.importance(&small).unwrap(), 2);
    let expected = (2.0 / 1.0) / (2.0 / 1.0 + 2.0 / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 10_000;
    let hits = (0..draws)
        .filter(|_| {
            state
                .sample_candidate(ElementKind::Relation, &mut rng)
                .unwrap()
                == small
        })
        .count();
    let freq = hits as f64 / draws as f64;
    assert!(
        (freq - expected).abs() <= 0.02,
        "observed {freq}, expected {expected}"
    );
}

#[test]
fn exhaustion_and_single_candidate() {
    let empty = DegradeState::new(toy::knowledge_base(), Vec::new()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in [
        ElementKind::Type,
        ElementKind::Relation,
        ElementKind::Entity,
        ElementKind::Fact,
    ] {
        assert!(
            matches!(empty.sample_candidate(kind, &mut rng), Err(DegradeError::Exhausted(k)) if k == kind)
        );
    }
    let kb = toy::knowledge_base();
    let qs = vec![record(&kb, "y", "(JOIN (R founded_year) o1)")];
    let state = DegradeState::new(kb, qs).unwrap();
    let year = Fact::new(
        "o1",
        "founded_year",
        Object::Literal(Literal::new("1990", LiteralKind::Date).unwrap()),
    );
    for _ in 0..50 {
        assert_eq!(
            state.sample_candidate(ElementKind::Fact, &mut rng).unwrap(),
            ElementRef::Fact(year.clone())
        );
    }
}

#[test]
fn capped_sampling_prefers_candidates_within_quota() {
    let state = toy_state();
    assert_eq!(
        state
            .importance(&ElementRef::Relation("founded_year".into()))
            .unwrap(),
        1
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let g = state
            .sample_candidate_capped(ElementKind::Relation, 1, &mut rng)
            .unwrap();
        assert_eq!(g, ElementRef::Relation("founded_year".into()));
    }
    // nothing fits a zero cap, so the least important candidates remain
    let g = state
        .sample_candidate_capped(ElementKind::Relation, 0, &mut rng)
        .unwrap();
    assert_eq!(g, ElementRef::Relation("founded_year".into()));
}

#[test]
fn type_sampling_skips_non_leaf_types() {
    let kb = toy::knowledge_base();
    let qs = vec![record(&kb, "p", "(AND person (JOIN works_at o1))")];
    let state = DegradeState::new(kb, qs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let g = state.sample_candidate(ElementKind::Type, &mut rng).unwrap();
        assert_ne!(g, ElementRef::Type("person".into()));
    }
}

#[test]
fn zero_target_changes_nothing() {
    let kb = toy::knowledge_base();
    let qs: Vec<QuestionRecord> = TOY_QUESTIONS
        .iter()
        .map(|(q, t)| record(&kb, q, t))
        .collect();
    let state = run_degrade(qs.clone(), kb.clone(), &DegradeConfig::equal_split(0.0, 1)).unwrap();
    assert_eq!(*state.kb(), kb);
    assert!(state.drop_log().is_empty());
    assert_eq!(state.questions(), qs.as_slice());
}

#[test]
fn config_validation() {
    let mut cfg = DegradeConfig::equal_split(0.4, 0);
    assert!(cfg.validate().is_ok());
    cfg.per_cause_fractions.insert(Cause::FactDrop, 0.2);
    assert!(matches!(cfg.validate(), Err(DegradeError::Config(_))));
    let cfg = DegradeConfig::equal_split(1.5, 0);
    assert!(matches!(cfg.validate(), Err(DegradeError::Config(_))));
}

#[test]
fn unanswerable_input_rejected() {
    let kb = toy::knowledge_base();
    let lf = parse("(JOIN works_at o2)").unwrap();
    let empty =
        QuestionRecord::answerable("e", "", lf, BTreeSet::from([Answer::Entity("a1".into())]));
    assert!(matches!(
        DegradeState::new(kb.clone(), vec![empty]),
        Err(DegradeError::InvalidCorpus { .. })
    ));
    let lf = parse("(JOIN mentors a1)").unwrap();
    let invalid =
        QuestionRecord::answerable("i", "", lf, BTreeSet::from([Answer::Entity("a1".into())]));
    assert!(matches!(
        DegradeState::new(kb.clone(), vec![invalid]),
        Err(DegradeError::InvalidCorpus { .. })
    ));
    let lf = parse("(JOIN works_at o1)").unwrap();
    let wrong =
        QuestionRecord::answerable("w", "", lf, BTreeSet::from([Answer::Entity("a1".into())]));
    assert!(matches!(
        DegradeState::new(kb.clone(), vec![wrong]),
        Err(DegradeError::InvalidCorpus { .. })
    ));
    let a = record(&kb, "dup", "(JOIN works_at o1)");
    assert!(matches!(
        DegradeState::new(kb, vec![a.clone(), a]),
        Err(DegradeError::DuplicateQid(_))
    ));
}

#[test]
fn replaying_the_log_reproduces_the_state() {
    let mut state = toy_state();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for cause in [Cause::RelationDrop, Cause::FactDrop, Cause::FactDrop] {
        if let Ok(g) = state.sample_candidate(cause.kind(), &mut rng) {
            state.apply_labeled_drop(&g, cause).unwrap();
        }
    }
    assert!(!state.drop_log().is_empty());
    let fresh = toy_state();
    let log: Vec<(ElementRef, Cause)> = state
        .drop_log()
        .iter()
        .map(|e| (e.element.clone(), e.cause))
        .collect();
    let again = replay(
        fresh.questions().to_vec(),
        fresh.ideal_kb().clone(),
        log.iter().map(|(g, c)| (g, *c)),
    )
    .unwrap();
    assert_eq!(again.kb(), state.kb());
    assert_eq!(again.questions(), state.questions());
    assert_eq!(again.drop_log(), state.drop_log());
    assert_eq!(again.index(), state.index());
}

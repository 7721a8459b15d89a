use super::*;
use crate::degrader::DegradeState;
use crate::kb::Object;
use crate::sexpr::parse;
use crate::toy;

fn state(questions: &[(&str, &str)]) -> DegradeState {
    let kb = toy::knowledge_base();
    let qs = questions
        .iter()
        .map(|(qid, text)| {
            let lf = parse(text).unwrap();
            let answers = execute(&lf, &kb).unwrap().answers;
            QuestionRecord::answerable(*qid, *text, lf, answers)
        })
        .collect();
    DegradeState::new(kb, qs).unwrap()
}

fn q<'a>(s: &'a DegradeState, qid: &str) -> &'a QuestionRecord {
    s.questions().iter().find(|r| r.qid == qid).unwrap()
}

#[test]
fn scenario_examples() {
    let mut s = state(&[
        ("only_advises", "(JOIN advises a3)"),
        ("mixed", "(AND researcher (JOIN advises a3))"),
        ("data", "(JOIN works_at o1)"),
        ("kept", "(AND researcher (JOIN works_at o1))"),
    ]);
    s.apply_labeled_drop(&ElementRef::Relation("advises".into()), Cause::RelationDrop)
        .unwrap();
    for f in ["a1", "a2", "a3"] {
        let fact = Fact::new(f, "works_at", Object::Entity("o1".into()));
        s.apply_labeled_drop(&ElementRef::Fact(fact), Cause::FactDrop)
            .unwrap();
    }
    let kb = s.kb();
    let none = BTreeSet::new();
    let seen: BTreeSet<ElementRef> = q(&s, "kept")
        .ideal_lf
        .schema_elements()
        .into_iter()
        .collect();
    assert!(seen.contains(&ElementRef::Type("researcher".into())));

    assert_eq!(
        classify_scenario(q(&s, "data"), &none, &seen, kb).unwrap(),
        Scenario::Iid
    );
    assert_eq!(
        classify_scenario(q(&s, "only_advises"), &none, &seen, kb).unwrap(),
        Scenario::FullZeroShot
    );
    assert_eq!(
        classify_scenario(q(&s, "mixed"), &none, &seen, kb).unwrap(),
        Scenario::PartialZeroShot
    );
    let advises = BTreeSet::from([ElementRef::Relation("advises".into())]);
    assert_eq!(
        classify_scenario(q(&s, "mixed"), &advises, &seen, kb).unwrap(),
        Scenario::Iid
    );
}

#[test]
fn answerable_records_have_no_scenario() {
    let s = state(&[("kept", "(JOIN works_at o1)")]);
    let none = BTreeSet::new();
    assert!(matches!(
        classify_scenario(&s.questions()[0], &none, &none, s.kb()),
        Err(SplitError::Answerable(_))
    ));
}

#[test]
fn all_answerable_input_gives_plain_partitions() {
    let s = state(&[
        ("a", "(JOIN works_at o1)"),
        ("b", "(AND researcher (JOIN works_at o1))"),
        ("c", "(JOIN advises a3)"),
        ("d", "(JOIN (R founded_year) o1)"),
        ("e", "(ARGMAX org founded_year)"),
        ("f", "(JOIN (R advises) a2)"),
        ("g", "(COUNT org)"),
        ("h", "(JOIN (R works_at) a1)"),
        ("i", "(JOIN advises a2)"),
        ("j", "(AND person (JOIN works_at o1))"),
    ]);
    let splits =
        build_splits(s.questions(), s.kb(), s.ideal_kb(), &SplitConfig::default()).unwrap();
    assert!(splits.zero_shot_elements.is_empty());
    assert!(splits.removed_for_leakage.is_empty());
    assert!(!splits.summary.warnings.is_empty());
    assert_eq!(
        (splits.train.len(), splits.test.len(), splits.dev.len()),
        (7, 2, 1)
    );
    let report = stats(&splits);
    for row in &report.splits {
        assert_eq!((row.nk, row.na, row.off_table), (0, 0, 0));
        assert!(row.cause_cells.iter().all(|&c| c == 0));
    }
}

#[test]
fn fact_drop_lands_in_na_cell() {
    let mut s = state(&[("data", "(JOIN works_at o1)")]);
    for f in ["a1", "a2", "a3"] {
        let fact = Fact::new(f, "works_at", Object::Entity("o1".into()));
        s.apply_labeled_drop(&ElementRef::Fact(fact), Cause::FactDrop)
            .unwrap();
    }
    let mut r = s.questions()[0].clone();
    r.scenario = Scenario::Iid;
    let splits = DatasetSplits {
        train: vec![r],
        dev: Vec::new(),
        test: Vec::new(),
        zero_shot_elements: BTreeSet::new(),
        removed_for_leakage: Vec::new(),
        path_leaks: BTreeMap::new(),
        summary: SplitSummary::default(),
    };
    let report = stats(&splits);
    let cell = CAUSE_CELLS
        .iter()
        .position(|c| *c == (Cause::FactDrop, Scenario::Iid, Label::Na))
        .unwrap();
    assert_eq!(report.splits[0].cause_cells[cell], 1);
    assert_eq!(report.splits[0].na, 1);
    assert_eq!(report.splits[0].nk, 0);
}

#[test]
fn zero_shot_cells_only_for_schema_causes() {
    for (cause, scenario, _) in CAUSE_CELLS {
        if scenario.is_zero_shot() {
            assert!(matches!(cause, Cause::TypeDrop | Cause::RelationDrop));
        }
    }
    let report = StatsReport::default();
    let text = report.render();
    assert!(text.contains("type drop") && text.contains("fact drop"));
}

#[test]
fn config_validation() {
    assert!(SplitConfig::default().validate().is_ok());
    let bad = SplitConfig {
        train: 0.8,
        ..SplitConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = SplitConfig {
        iid: 0.6,
        ..SplitConfig::default()
    };
    assert!(bad.validate().is_err());
}

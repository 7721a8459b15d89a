use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::kb::{Fact, LiteralKind, Object};
use crate::synth::{random_kb, KbParams, LfGenerator};
use crate::toy;

fn lf(s: &str) -> LogicalForm {
    parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn ent(id: &str) -> Answer {
    Answer::Entity(id.to_string())
}

#[test]
fn parses_and_with_join() {
    let got = lf("(AND researcher (JOIN works_at o1))");
    let want = Expr::And(
        Box::new(Expr::Type("researcher".into())),
        Box::new(Expr::Join(
            RelationTerm::forward("works_at"),
            Box::new(Expr::Entity("o1".into())),
        )),
    );
    assert_eq!(got.root(), &want);
}

#[test]
fn parses_inverse_relation() {
    let got = lf("(JOIN (R works_at) a1)");
    assert_eq!(
        got.root(),
        &Expr::Join(
            RelationTerm::inverse("works_at"),
            Box::new(Expr::Entity("a1".into()))
        )
    );
}

#[test]
fn parses_comparatives_and_extrema() {
    let got = lf("(ARGMIN (AND org (lt founded_year \"2000\"^^date)) founded_year)");
    assert_eq!(
        got.to_string(),
        "(ARGMIN (AND org (lt founded_year \"2000\"^^date)) founded_year)"
    );
    assert!(matches!(got.root(), Expr::Arg(Extremum::Min, _, _)));
    let cmp = lf("(ge founded_year \"1995\"^^date)");
    assert!(matches!(cmp.root(), Expr::Compare(Comparator::Ge, _, _)));
}

#[test]
fn arity_errors() {
    let e = parse("(AND researcher)").unwrap_err();
    assert_eq!(
        e.kind,
        ParseErrorKind::Arity {
            op: "AND".into(),
            expected: 2,
            found: 1
        }
    );
    let e = parse("(COUNT a b)").unwrap_err();
    assert!(matches!(e.kind, ParseErrorKind::Arity { .. }));
    let e = parse("(JOIN (R a b) c)").unwrap_err();
    assert!(matches!(e.kind, ParseErrorKind::Arity { .. }));
}

#[test]
fn syntax_errors_carry_positions() {
    let e = parse("(AND researcher (JOIN works_at o1)").unwrap_err();
    assert_eq!((e.kind, e.position), (ParseErrorKind::Unbalanced, 0));
    let e = parse("(JOIN works_at o1))").unwrap_err();
    assert_eq!((e.kind, e.position), (ParseErrorKind::Unbalanced, 18));
    let e = parse("(OR a b)").unwrap_err();
    assert_eq!(
        (e.kind, e.position),
        (ParseErrorKind::UnknownOperator("OR".into()), 1)
    );
    let e = parse("(lt founded_year \"x\"^^date)").unwrap_err();
    assert!(matches!(e.kind, ParseErrorKind::MalformedLiteral(_)));
    assert_eq!(e.position, 17);
    let e = parse("(lt founded_year o1)").unwrap_err();
    assert_eq!(e.kind, ParseErrorKind::Expected("literal"));
    assert_eq!(parse("   ").unwrap_err().kind, ParseErrorKind::Empty);
    assert_eq!(parse("()").unwrap_err().kind, ParseErrorKind::Empty);
    assert_eq!(parse("a b").unwrap_err().kind, ParseErrorKind::Trailing);
}

#[test]
fn nk_is_not_a_logical_form() {
    assert_eq!(parse("NK").unwrap_err().kind, ParseErrorKind::ReservedNk);
    assert_eq!(
        parse("(JOIN works_at NK)").unwrap_err().kind,
        ParseErrorKind::ReservedNk
    );
}

#[test]
fn rendering_normalizes_whitespace() {
    let a = lf("( JOIN   works_at\n o1 )");
    assert_eq!(a.to_string(), "(JOIN works_at o1)");
    assert_eq!(lf(&a.to_string()), a);
}

#[test]
fn validate_reports_missing_in_document_order() {
    let kb = toy::knowledge_base();
    assert!(lf("(JOIN works_at o1)").validate(&kb).valid);

    let mut no_advises = kb.clone();
    no_advises
        .apply_drop(&ElementRef::Relation("advises".into()))
        .unwrap();
    let report = lf("(AND researcher (JOIN advises a3))").validate(&no_advises);
    assert!(!report.valid);
    assert_eq!(report.missing, vec![ElementRef::Relation("advises".into())]);

    let mut no_o2 = kb.clone();
    no_o2.apply_drop(&ElementRef::Entity("o2".into())).unwrap();
    let report = lf("(JOIN works_at o2)").validate(&no_o2);
    assert_eq!(report.missing, vec![ElementRef::Entity("o2".into())]);

    let report = lf("(AND ghost (JOIN haunts (JOIN haunts o9)))").validate(&kb);
    assert_eq!(
        report.missing,
        vec![
            ElementRef::Type("ghost".into()),
            ElementRef::Relation("haunts".into()),
            ElementRef::Entity("o9".into()),
        ]
    );
}

#[test]
fn execute_researchers_at_o1() {
    let kb = toy::knowledge_base();
    // brute force over the fixture: researcher-tagged entities with a works_at o1 fact
    let expected: BTreeSet<Answer> = kb
        .entities()
        .iter()
        .filter(|(_, d)| d.types.contains("researcher"))
        .map(|(id, _)| id)
        .filter(|id| {
            kb.facts().iter().any(|f| {
                f.subject == **id
                    && f.relation == "works_at"
                    && f.object == Object::Entity("o1".into())
            })
        })
        .map(|id| ent(id))
        .collect();
    assert_eq!(expected, BTreeSet::from([ent("a1"), ent("a2")]));

    let exec = execute(&lf("(AND researcher (JOIN works_at o1))"), &kb).unwrap();
    assert_eq!(exec.answers, expected);
    assert_eq!(
        exec.paths[&ent("a1")],
        BTreeSet::from([Fact::new("a1", "works_at", Object::Entity("o1".into()))])
    );
}

#[test]
fn execute_count_of_nothing_is_empty() {
    let kb = toy::knowledge_base();
    let exec = execute(&lf("(COUNT (JOIN works_at o2))"), &kb).unwrap();
    assert!(exec.is_empty());
    assert_eq!(exec.count, Some(0));
    let exec = execute(&lf("(COUNT (JOIN works_at o1))"), &kb).unwrap();
    assert_eq!(exec.count, Some(3));
    assert_eq!(exec.answers.len(), 1);
    assert_eq!(exec.support().len(), 3);
}

#[test]
fn execute_argmax_keeps_supporting_fact() {
    let kb = toy::knowledge_base();
    let exec = execute(&lf("(ARGMAX org founded_year)"), &kb).unwrap();
    assert_eq!(exec.answers, BTreeSet::from([ent("o2")]));
    let fact = Fact::new(
        "o2",
        "founded_year",
        Object::Literal(Literal::new("2005", LiteralKind::Date).unwrap()),
    );
    assert_eq!(exec.paths[&ent("o2")], BTreeSet::from([fact]));
    let exec = execute(&lf("(ARGMIN org founded_year)"), &kb).unwrap();
    assert_eq!(exec.answers, BTreeSet::from([ent("o1")]));
    // members without the relation drop out rather than fail
    let exec = execute(&lf("(ARGMAX person founded_year)"), &kb).unwrap();
    assert!(exec.is_empty());
}

#[test]
fn argmax_ties_are_all_kept() {
    let mut kb = toy::knowledge_base();
    kb.apply_drop(&ElementRef::Entity("o2".into())).unwrap();
    kb.add_entity("o3", ["org"], "").unwrap();
    let lit = Literal::new("1990", LiteralKind::Date).unwrap();
    kb.add_fact(Fact::new("o3", "founded_year", Object::Literal(lit)))
        .unwrap();
    let exec = execute(&lf("(ARGMAX org founded_year)"), &kb).unwrap();
    assert_eq!(exec.answers, BTreeSet::from([ent("o1"), ent("o3")]));
}

#[test]
fn inverse_join_and_comparatives() {
    let kb = toy::knowledge_base();
    let exec = execute(&lf("(JOIN (R works_at) a1)"), &kb).unwrap();
    assert_eq!(exec.answers, BTreeSet::from([ent("o1")]));
    let exec = execute(&lf("(gt founded_year \"1990\"^^date)"), &kb).unwrap();
    assert_eq!(exec.answers, BTreeSet::from([ent("o2")]));
    let exec = execute(&lf("(le founded_year \"1990\"^^date)"), &kb).unwrap();
    assert_eq!(exec.answers, BTreeSet::from([ent("o1")]));
    let exec = execute(&lf("(JOIN (R founded_year) o1)"), &kb).unwrap();
    assert_eq!(
        exec.answers,
        BTreeSet::from([Answer::Literal(
            Literal::new("1990", LiteralKind::Date).unwrap()
        )])
    );
}

#[test]
fn execution_errors() {
    let kb = toy::knowledge_base();
    assert!(matches!(
        execute(&lf("(JOIN mentors o1)"), &kb),
        Err(ExecError::Invalid(_))
    ));
    assert!(matches!(
        execute(&lf("(gt founded_year \"3\"^^integer)"), &kb),
        Err(ExecError::Incomparable { .. })
    ));
    assert!(matches!(
        execute(&lf("(lt founded_year \"x\"^^string)"), &kb),
        Err(ExecError::StringComparison(_))
    ));
    assert!(matches!(
        execute(&lf("(ARGMAX person works_at)"), &kb),
        Err(ExecError::NonLiteralValue(_))
    ));
}

#[test]
fn contains_element_by_kind() {
    let form = lf("(JOIN works_at o1)");
    assert!(form.contains_element(&ElementRef::Relation("works_at".into())));
    assert!(!form.contains_element(&ElementRef::Entity("o2".into())));
    assert!(!form.contains_element(&ElementRef::Type("works_at".into())));
    let fact = Fact::new("a1", "works_at", Object::Entity("o1".into()));
    assert!(!form.contains_element(&ElementRef::Fact(fact)));
}

fn kb_and_lfs() -> impl Strategy<Value = (u64, u64)> {
    (any::<u64>(), any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_parse_round_trip((kb_seed, lf_seed) in kb_and_lfs()) {
        let kb = random_kb(kb_seed, &KbParams::default());
        let gen = LfGenerator::new(&kb);
        let mut rng = ChaCha8Rng::seed_from_u64(lf_seed);
        for _ in 0..5 {
            let form = gen.generate(4, &mut rng);
            prop_assert!(form.root().depth() <= 4);
            let text = form.to_string();
            prop_assert_eq!(parse(&text).unwrap(), form);
        }
    }

    #[test]
    fn removing_support_removes_answer((kb_seed, lf_seed) in kb_and_lfs()) {
        let kb = random_kb(kb_seed, &KbParams::default());
        let gen = LfGenerator::new(&kb);
        let mut rng = ChaCha8Rng::seed_from_u64(lf_seed);
        let form = gen.generate(4, &mut rng);
        let exec = execute(&form, &kb).unwrap();
        for (answer, support) in &exec.paths {
            for f in support {
                prop_assert!(kb.facts().contains(f));
            }
            if support.is_empty() {
                continue;
            }
            // strip supports until the answer is gone or no support remains
            let mut degraded = kb.clone();
            let mut current = support.clone();
            loop {
                for f in &current {
                    degraded.apply_drop(&ElementRef::Fact(f.clone())).unwrap();
                }
                let again = execute(&form, &degraded).unwrap();
                match again.paths.get(answer) {
                    Some(next) if !next.is_empty() => current = next.clone(),
                    Some(_) => {
                        prop_assert!(false, "{} survived with an empty support in {}", answer, form);
                    }
                    None => break,
                }
            }
        }
    }

    #[test]
    fn dropping_a_fact_only_shrinks_monotone_forms((kb_seed, lf_seed) in kb_and_lfs(), pick in any::<prop::sample::Index>()) {
        let kb = random_kb(kb_seed, &KbParams::default());
        let gen = LfGenerator::new(&kb);
        let mut rng = ChaCha8Rng::seed_from_u64(lf_seed);
        let form = gen.generate(4, &mut rng);
        prop_assume!(!form.root().has_non_monotone_operator());
        let facts: Vec<_> = kb.facts().iter().cloned().collect();
        prop_assume!(!facts.is_empty());
        let before = execute(&form, &kb).unwrap().answers;
        let mut smaller = kb.clone();
        smaller.apply_drop(&ElementRef::Fact(pick.get(&facts).clone())).unwrap();
        let after = execute(&form, &smaller).unwrap().answers;
        prop_assert!(after.is_subset(&before));
    }
}

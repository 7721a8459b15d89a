//! Set-comprehension interpreter used as an independent oracle for the
//! executor. Scans the full fact list for every operator and uses no index.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use kbqa_answerability::kb::{KnowledgeBase, Literal, LiteralKind, Object};
use kbqa_answerability::sexpr::{Answer, Comparator, Expr, Extremum, LogicalForm};

fn descendants(kb: &KnowledgeBase, t: &str) -> BTreeSet<String> {
    let mut family = BTreeSet::from([t.to_string()]);
    loop {
        let grown: Vec<String> = kb
            .types()
            .iter()
            .filter(|(id, d)| !family.contains(*id) && d.parents.iter().any(|p| family.contains(p)))
            .map(|(id, _)| id.clone())
            .collect();
        if grown.is_empty() {
            return family;
        }
        family.extend(grown);
    }
}

fn as_answer(o: &Object) -> Answer {
    match o {
        Object::Entity(e) => Answer::Entity(e.clone()),
        Object::Literal(l) => Answer::Literal(l.clone()),
    }
}

fn key(l: &Literal) -> (u8, f64, String) {
    match l.kind() {
        LiteralKind::Integer | LiteralKind::Float => {
            (0, l.lexical().parse().unwrap(), String::new())
        }
        LiteralKind::Date => {
            let mut s = l.lexical().to_string();
            if s.len() == 4 {
                s.push_str("-01");
            }
            if s.len() == 7 {
                s.push_str("-01");
            }
            (1, 0.0, s)
        }
        LiteralKind::String => panic!("oracle never orders strings"),
    }
}

fn cmp(a: &Literal, b: &Literal) -> Ordering {
    let (ka, kb) = (key(a), key(b));
    assert_eq!(ka.0, kb.0, "oracle compared incompatible kinds");
    ka.1.partial_cmp(&kb.1).unwrap().then(ka.2.cmp(&kb.2))
}

fn universe(kb: &KnowledgeBase) -> BTreeSet<Answer> {
    let mut u: BTreeSet<Answer> = kb
        .entities()
        .keys()
        .map(|e| Answer::Entity(e.clone()))
        .collect();
    for f in kb.facts() {
        u.insert(as_answer(&f.object));
    }
    u
}

fn denote(e: &Expr, kb: &KnowledgeBase) -> BTreeSet<Answer> {
    match e {
        Expr::Entity(id) => BTreeSet::from([Answer::Entity(id.clone())]),
        Expr::Literal(l) => BTreeSet::from([Answer::Literal(l.clone())]),
        Expr::Type(t) => {
            let family = descendants(kb, t);
            kb.entities()
                .iter()
                .filter(|(_, d)| d.types.iter().any(|x| family.contains(x)))
                .map(|(id, _)| Answer::Entity(id.clone()))
                .collect()
        }
        Expr::And(a, b) => {
            let (x, y) = (denote(a, kb), denote(b, kb));
            x.intersection(&y).cloned().collect()
        }
        Expr::Join(rt, x) => {
            let inner = denote(x, kb);
            universe(kb)
                .into_iter()
                .filter(|s| {
                    kb.facts().iter().any(|f| {
                        if f.relation != rt.relation {
                            return false;
                        }
                        let (subj, obj) = (Answer::Entity(f.subject.clone()), as_answer(&f.object));
                        if rt.inverted {
                            obj == *s && inner.contains(&subj)
                        } else {
                            subj == *s && inner.contains(&obj)
                        }
                    })
                })
                .collect()
        }
        Expr::Count(x) => BTreeSet::from([Answer::Literal(Literal::integer(
            denote(x, kb).len() as i64
        ))]),
        Expr::Arg(ext, x, rt) => {
            let inner = denote(x, kb);
            let best_of = |m: &Answer| -> Option<Literal> {
                let vals: Vec<Literal> = kb
                    .facts()
                    .iter()
                    .filter(|f| {
                        f.relation == rt.relation && Answer::Entity(f.subject.clone()) == *m
                    })
                    .filter_map(|f| match &f.object {
                        Object::Literal(l) => Some(l.clone()),
                        Object::Entity(_) => None,
                    })
                    .collect();
                vals.into_iter().reduce(|a, b| {
                    let ord = cmp(&b, &a);
                    let take_b = match ext {
                        Extremum::Max => ord == Ordering::Greater,
                        Extremum::Min => ord == Ordering::Less,
                    };
                    if take_b {
                        b
                    } else {
                        a
                    }
                })
            };
            let scored: Vec<(Answer, Literal)> = inner
                .iter()
                .filter_map(|m| best_of(m).map(|v| (m.clone(), v)))
                .collect();
            let top = scored.iter().map(|(_, v)| v.clone()).reduce(|a, b| {
                let ord = cmp(&b, &a);
                let take_b = match ext {
                    Extremum::Max => ord == Ordering::Greater,
                    Extremum::Min => ord == Ordering::Less,
                };
                if take_b {
                    b
                } else {
                    a
                }
            });
            match top {
                None => BTreeSet::new(),
                Some(top) => scored
                    .into_iter()
                    .filter(|(_, v)| cmp(v, &top) == Ordering::Equal)
                    .map(|(m, _)| m)
                    .collect(),
            }
        }
        Expr::Compare(c, rt, v) => kb
            .facts()
            .iter()
            .filter(|f| f.relation == rt.relation)
            .filter(|f| match &f.object {
                Object::Literal(l) => {
                    let ord = cmp(l, v);
                    match c {
                        Comparator::Lt => ord == Ordering::Less,
                        Comparator::Le => ord != Ordering::Greater,
                        Comparator::Gt => ord == Ordering::Greater,
                        Comparator::Ge => ord != Ordering::Less,
                    }
                }
                Object::Entity(_) => false,
            })
            .map(|f| Answer::Entity(f.subject.clone()))
            .collect(),
    }
}

/// Answer set of a logical form; a top-level count of zero is empty.
pub fn answers(lf: &LogicalForm, kb: &KnowledgeBase) -> BTreeSet<Answer> {
    let out = denote(lf.root(), kb);
    if matches!(lf.root(), Expr::Count(_))
        && out
            .iter()
            .all(|a| matches!(a, Answer::Literal(l) if l.lexical() == "0"))
    {
        return BTreeSet::new();
    }
    out
}

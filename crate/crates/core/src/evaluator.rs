//! Logical-form exact match, regular and lenient answer F1, confidence
//! thresholding and grouped reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{AnswerLabel, Cause, LfLabel, QuestionRecord, Scenario, Status};
use crate::sexpr::parse;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("duplicate prediction for {0}")]
    DuplicatePrediction(String),
    #[error("duplicate gold record {0}")]
    DuplicateGold(String),
    #[error("prediction for unknown question {0}")]
    UnknownQid(String),
    #[error("prediction {0} has an NK form but answers other than NA")]
    NkWithAnswers(String),
    #[error("prediction {0} has a non-finite score")]
    NonFiniteScore(String),
    #[error("no prediction carries a score")]
    NoScores,
}

/// A predicted logical form: raw text, or `NK`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PredictedLf {
    Form(String),
    Nk,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub qid: String,
    pub predicted_lf: PredictedLf,
    pub predicted_answers: AnswerLabel,
    pub entity_score: Option<f64>,
    pub lf_score: Option<f64>,
}

impl Prediction {
    /// The refusal prediction: NK and NA.
    pub fn refusal(qid: impl Into<String>) -> Self {
        Prediction {
            qid: qid.into(),
            predicted_lf: PredictedLf::Nk,
            predicted_answers: AnswerLabel::Na,
            entity_score: None,
            lf_score: None,
        }
    }

    /// Copies the current gold labels of a record.
    pub fn from_gold(record: &QuestionRecord) -> Self {
        Prediction {
            qid: record.qid.clone(),
            predicted_lf: match &record.current_lf {
                LfLabel::Form(lf) => PredictedLf::Form(lf.to_string()),
                LfLabel::Nk => PredictedLf::Nk,
            },
            predicted_answers: record.current_answers.clone(),
            entity_score: None,
            lf_score: None,
        }
    }

    pub fn check(&self) -> Result<(), EvalError> {
        if self.predicted_lf == PredictedLf::Nk && !self.predicted_answers.is_na() {
            return Err(EvalError::NkWithAnswers(self.qid.clone()));
        }
        if [self.entity_score, self.lf_score]
            .iter()
            .flatten()
            .any(|s| !s.is_finite())
        {
            return Err(EvalError::NonFiniteScore(self.qid.clone()));
        }
        Ok(())
    }
}

/// Entity and logical-form thresholds. `-inf` never forces a refusal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub entity: f64,
    pub lf: f64,
}

impl Thresholds {
    pub const NONE: Thresholds = Thresholds {
        entity: f64::NEG_INFINITY,
        lf: f64::NEG_INFINITY,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision, recall and F1 of a predicted answer label. NA is a label:
/// NA against NA scores 1, NA against a set scores 0.
pub fn answer_prf(pred: &AnswerLabel, gold: &AnswerLabel) -> Prf {
    let (p, r) = match (pred, gold) {
        (AnswerLabel::Na, AnswerLabel::Na) => (1.0, 1.0),
        (AnswerLabel::Set(p), AnswerLabel::Set(g)) => {
            let hit = p.intersection(g).count() as f64;
            let ratio = |n: usize| if n == 0 { 0.0 } else { hit / n as f64 };
            (ratio(p.len()), ratio(g.len()))
        }
        _ => (0.0, 0.0),
    };
    Prf {
        precision: p,
        recall: r,
        f1: harmonic(p, r),
    }
}

/// F1 from the larger precision and the larger recall against the degraded
/// and the ideal gold.
pub fn lenient_f1(
    pred: &AnswerLabel,
    gold_degraded: &AnswerLabel,
    gold_ideal: &AnswerLabel,
) -> f64 {
    let a = answer_prf(pred, gold_degraded);
    let b = answer_prf(pred, gold_ideal);
    harmonic(a.precision.max(b.precision), a.recall.max(b.recall))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactMatch {
    pub matched: bool,
    /// The predicted form did not parse.
    pub unparseable: bool,
}

/// Exact match of canonical renderings; NK matches only NK.
pub fn em(pred: &PredictedLf, gold: &LfLabel) -> ExactMatch {
    match (pred, gold) {
        (PredictedLf::Nk, LfLabel::Nk) => ExactMatch {
            matched: true,
            unparseable: false,
        },
        (PredictedLf::Nk, LfLabel::Form(_)) => ExactMatch {
            matched: false,
            unparseable: false,
        },
        (PredictedLf::Form(text), gold) => match parse(text) {
            Err(_) => ExactMatch {
                matched: false,
                unparseable: true,
            },
            Ok(lf) => ExactMatch {
                matched: matches!(gold, LfLabel::Form(g) if g.to_string() == lf.to_string()),
                unparseable: false,
            },
        },
    }
}

/// Forces NK/NA when a present score falls strictly below its threshold.
pub fn apply_thresholds(pred: &Prediction, t: &Thresholds) -> Prediction {
    let below = |score: Option<f64>, tau: f64| score.is_some_and(|s| s < tau);
    if below(pred.entity_score, t.entity) || below(pred.lf_score, t.lf) {
        Prediction {
            predicted_lf: PredictedLf::Nk,
            predicted_answers: AnswerLabel::Na,
            ..pred.clone()
        }
    } else {
        pred.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowScore {
    pub qid: String,
    pub status: Status,
    pub scenario: Scenario,
    pub cause: Option<Cause>,
    pub em: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_regular: f64,
    pub f1_lenient: f64,
    pub missing_prediction: bool,
    pub unparseable: bool,
    pub forced_refusal: bool,
}

fn score_row(pred: &Prediction, gold: &QuestionRecord, missing: bool, forced: bool) -> RowScore {
    let m = em(&pred.predicted_lf, &gold.current_lf);
    let prf = answer_prf(&pred.predicted_answers, &gold.current_answers);
    let ideal = AnswerLabel::Set(gold.ideal_answers.clone());
    RowScore {
        qid: gold.qid.clone(),
        status: gold.status,
        scenario: gold.scenario,
        cause: gold.primary_cause(),
        em: if m.matched { 1.0 } else { 0.0 },
        precision: prf.precision,
        recall: prf.recall,
        f1_regular: prf.f1,
        f1_lenient: lenient_f1(&pred.predicted_answers, &gold.current_answers, &ideal),
        missing_prediction: missing,
        unparseable: m.unparseable,
        forced_refusal: forced,
    }
}

/// Mean metrics over a group of rows; `None` for an empty group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub group: String,
    pub count: usize,
    pub em: Option<f64>,
    pub f1_regular: Option<f64>,
    pub f1_lenient: Option<f64>,
}

fn aggregate<'a>(group: &str, rows: impl Iterator<Item = &'a RowScore>) -> Aggregate {
    let rows: Vec<&RowScore> = rows.collect();
    let n = rows.len();
    let mean = |f: fn(&RowScore) -> f64| {
        if n == 0 {
            None
        } else {
            Some(rows.iter().map(|r| f(r)).sum::<f64>() / n as f64)
        }
    };
    Aggregate {
        group: group.to_string(),
        count: n,
        em: mean(|r| r.em),
        f1_regular: mean(|r| r.f1_regular),
        f1_lenient: mean(|r| r.f1_lenient),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<RowScore>,
    /// all, answerable, unanswerable
    pub by_answerability: Vec<Aggregate>,
    /// iid, partial and full zero-shot, over unanswerable rows
    pub by_scenario: Vec<Aggregate>,
    /// per primary cause, over unanswerable rows
    pub by_cause: Vec<Aggregate>,
    pub thresholds: Option<[Option<f64>; 2]>,
    pub missing_predictions: Vec<String>,
    pub unparseable_predictions: Vec<String>,
}

impl EvalReport {
    pub fn group(&self, name: &str) -> Option<&Aggregate> {
        self.by_answerability
            .iter()
            .chain(&self.by_scenario)
            .chain(&self.by_cause)
            .find(|a| a.group == name)
    }

    /// Plain-text tables with F1(L), F1(R) and EM in percent.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let pct = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{:.1}", 100.0 * v));
        for (title, groups) in [
            ("answerability", &self.by_answerability),
            ("scenario", &self.by_scenario),
            ("cause", &self.by_cause),
        ] {
            let _ = writeln!(
                out,
                "{:<18} {:>6} {:>7} {:>7} {:>7}",
                title, "n", "F1(L)", "F1(R)", "EM"
            );
            for a in groups {
                let _ = writeln!(
                    out,
                    "{:<18} {:>6} {:>7} {:>7} {:>7}",
                    a.group,
                    a.count,
                    pct(a.f1_lenient),
                    pct(a.f1_regular),
                    pct(a.em)
                );
            }
            out.push('\n');
        }
        if let Some([e, l]) = self.thresholds {
            let show = |x: Option<f64>| x.map_or("-inf".to_string(), |v| format!("{v}"));
            let _ = writeln!(out, "thresholds: entity {} lf {}", show(e), show(l));
        }
        if !self.missing_predictions.is_empty() {
            let _ = writeln!(
                out,
                "missing predictions: {}",
                self.missing_predictions.len()
            );
        }
        if !self.unparseable_predictions.is_empty() {
            let _ = writeln!(
                out,
                "unparseable predictions: {}",
                self.unparseable_predictions.len()
            );
        }
        out
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Scores predictions against gold records. Missing predictions count as
/// NK/NA and are listed in the report.
pub fn evaluate(
    predictions: &[Prediction],
    gold: &[QuestionRecord],
    thresholds: Option<&Thresholds>,
) -> Result<EvalReport, EvalError> {
    let mut by_qid: BTreeMap<&str, &QuestionRecord> = BTreeMap::new();
    for g in gold {
        if by_qid.insert(&g.qid, g).is_some() {
            return Err(EvalError::DuplicateGold(g.qid.clone()));
        }
    }
    let mut preds: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in predictions {
        p.check()?;
        if !by_qid.contains_key(p.qid.as_str()) {
            return Err(EvalError::UnknownQid(p.qid.clone()));
        }
        if preds.insert(&p.qid, p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.qid.clone()));
        }
    }
    let mut rows = Vec::with_capacity(by_qid.len());
    for (qid, g) in &by_qid {
        let (pred, missing) = match preds.get(qid) {
            Some(p) => ((*p).clone(), false),
            None => (Prediction::refusal(*qid), true),
        };
        let (pred, forced) = match thresholds {
            Some(t) => {
                let after = apply_thresholds(&pred, t);
                let forced = after.predicted_lf != pred.predicted_lf
                    || after.predicted_answers != pred.predicted_answers;
                (after, forced)
            }
            None => (pred, false),
        };
        rows.push(score_row(&pred, g, missing, forced));
    }
    let unanswerable = |r: &&RowScore| r.status == Status::Unanswerable;
    let by_answerability = vec![
        aggregate("all", rows.iter()),
        aggregate(
            "answerable",
            rows.iter().filter(|r| r.status == Status::Answerable),
        ),
        aggregate("unanswerable", rows.iter().filter(unanswerable)),
    ];
    let by_scenario = [
        Scenario::Iid,
        Scenario::PartialZeroShot,
        Scenario::FullZeroShot,
    ]
    .into_iter()
    .map(|s| {
        aggregate(
            s.name(),
            rows.iter().filter(unanswerable).filter(|r| r.scenario == s),
        )
    })
    .collect();
    let by_cause = Cause::ALL
        .into_iter()
        .map(|c| {
            aggregate(
                c.name(),
                rows.iter()
                    .filter(unanswerable)
                    .filter(|r| r.cause == Some(c)),
            )
        })
        .collect();
    Ok(EvalReport {
        missing_predictions: rows
            .iter()
            .filter(|r| r.missing_prediction)
            .map(|r| r.qid.clone())
            .collect(),
        unparseable_predictions: rows
            .iter()
            .filter(|r| r.unparseable)
            .map(|r| r.qid.clone())
            .collect(),
        thresholds: thresholds.map(|t| [finite(t.entity), finite(t.lf)]),
        rows,
        by_answerability,
        by_scenario,
        by_cause,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Objective {
    Em,
    F1Regular,
}

/// Mean objective over all gold records with thresholds applied.
pub fn objective_value(
    predictions: &[Prediction],
    gold: &[QuestionRecord],
    thresholds: &Thresholds,
    objective: Objective,
) -> Result<f64, EvalError> {
    let report = evaluate(predictions, gold, Some(thresholds))?;
    let all = &report.by_answerability[0];
    Ok(match objective {
        Objective::Em => all.em,
        Objective::F1Regular => all.f1_regular,
    }
    .unwrap_or(0.0))
}

/// Chooses thresholds that maximise the mean objective on dev.
///
/// Candidates per threshold are `-inf` and the sorted distinct observed
/// scores. Each threshold is first swept with the other at `-inf`, then the
/// pair is refined coordinate-wise until neither sweep improves. Only strict
/// improvements are accepted, so ties resolve toward smaller thresholds and
/// the result never scores below no thresholding.
pub fn tune_thresholds(
    dev_predictions: &[Prediction],
    dev_gold: &[QuestionRecord],
    objective: Objective,
) -> Result<Thresholds, EvalError> {
    let candidates = |f: fn(&Prediction) -> Option<f64>| {
        let mut v: Vec<f64> = dev_predictions.iter().filter_map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let mut out = vec![f64::NEG_INFINITY];
        out.extend(v);
        out
    };
    let entity = candidates(|p| p.entity_score);
    let lf = candidates(|p| p.lf_score);
    if entity.len() == 1 && lf.len() == 1 {
        return Err(EvalError::NoScores);
    }
    let value = |t: &Thresholds| objective_value(dev_predictions, dev_gold, t, objective);
    let sweep =
        |base: Thresholds, on_entity: bool, best: &mut f64| -> Result<Thresholds, EvalError> {
            let mut chosen = base;
            for &tau in if on_entity { &entity } else { &lf } {
                let t = if on_entity {
                    Thresholds {
                        entity: tau,
                        ..base
                    }
                } else {
                    Thresholds { lf: tau, ..base }
                };
                let v = value(&t)?;
                if v > *best {
                    *best = v;
                    chosen = t;
                }
            }
            Ok(chosen)
        };

    let base_value = value(&Thresholds::NONE)?;
    let mut best_e = base_value;
    let only_e = sweep(Thresholds::NONE, true, &mut best_e)?;
    let mut best_l = base_value;
    let only_l = sweep(Thresholds::NONE, false, &mut best_l)?;
    let mut current = Thresholds {
        entity: only_e.entity,
        lf: only_l.lf,
    };
    let mut best = value(&current)?;
    // keep the better single-threshold result if combining them hurts
    for (t, v) in [
        (only_e, best_e),
        (only_l, best_l),
        (Thresholds::NONE, base_value),
    ] {
        if v > best {
            best = v;
            current = t;
        }
    }
    for _ in 0..16 {
        let before = current;
        current = sweep(current, true, &mut best)?;
        current = sweep(current, false, &mut best)?;
        if current == before {
            break;
        }
    }
    Ok(current)
}

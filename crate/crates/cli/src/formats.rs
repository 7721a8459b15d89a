//! JSON-lines formats for datasets, predictions and drop logs.
//!
//! Every line carries `format_version`. Answers are strings: entity ids as
//! is, literals as `"value"^^kind`. The label markers `NK` and `NA` stand in
//! for a logical form and an answer list respectively.

use std::collections::BTreeSet;
use std::path::Path;

use kbqa_answerability::dataset::{AnswerLabel, Cause, LfLabel, QuestionRecord, Scenario, Status};
use kbqa_answerability::degrader::DropLogEntry;
use kbqa_answerability::evaluator::{PredictedLf, Prediction};
use kbqa_answerability::kb::{ElementKind, ElementRef, Fact, Object};
use kbqa_answerability::sexpr::{parse, Answer};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

pub const NK: &str = "NK";
pub const NA: &str = "NA";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}:{line}: {message}")]
    Line { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// An answer list or the `NA` marker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswersField {
    List(Vec<String>),
    Marker(String),
}

impl AnswersField {
    pub fn from_label(label: &AnswerLabel) -> Self {
        match label {
            AnswerLabel::Na => AnswersField::Marker(NA.to_string()),
            AnswerLabel::Set(s) => AnswersField::List(render_answers(s)),
        }
    }

    pub fn to_label(&self) -> Result<AnswerLabel, String> {
        match self {
            AnswersField::Marker(m) if m == NA => Ok(AnswerLabel::Na),
            AnswersField::Marker(m) => Err(format!("expected an answer list or \"NA\", found \"{m}\"")),
            AnswersField::List(items) => Ok(AnswerLabel::Set(parse_answers(items)?)),
        }
    }
}

pub fn render_answers(set: &BTreeSet<Answer>) -> Vec<String> {
    set.iter().map(ToString::to_string).collect()
}

pub fn parse_answers(items: &[String]) -> Result<BTreeSet<Answer>, String> {
    items
        .iter()
        .map(|s| {
            if s == NA {
                return Err("\"NA\" inside an answer list".to_string());
            }
            s.parse::<Answer>().map_err(|e| format!("bad answer `{s}`: {e}"))
        })
        .collect()
}

fn yes() -> bool {
    true
}

/// One dataset row.
///
/// Input corpora may omit the current-label fields; such rows load as fresh
/// answerable questions whose current labels equal the ideal ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetLine {
    pub format_version: u32,
    pub qid: String,
    pub question: String,
    pub ideal_s_expression: String,
    pub ideal_answers: Vec<String>,
    /// Ideal fields are bookkeeping; training must not see them.
    #[serde(default = "yes")]
    pub ideal_not_for_training: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<AnswersField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<Status>,
    #[serde(default)]
    pub causes: Vec<Cause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

impl DatasetLine {
    pub fn from_record(r: &QuestionRecord) -> Self {
        DatasetLine {
            format_version: FORMAT_VERSION,
            qid: r.qid.clone(),
            question: r.question.clone(),
            ideal_s_expression: r.ideal_lf.to_string(),
            ideal_answers: render_answers(&r.ideal_answers),
            ideal_not_for_training: true,
            s_expression: Some(match &r.current_lf {
                LfLabel::Nk => NK.to_string(),
                LfLabel::Form(lf) => lf.to_string(),
            }),
            answers: Some(AnswersField::from_label(&r.current_answers)),
            status: Some(r.status),
            causes: r.causes.clone(),
            scenario: Some(r.scenario),
        }
    }

    pub fn to_record(&self) -> Result<QuestionRecord, String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!("unsupported format_version {}", self.format_version));
        }
        let ideal_lf = parse(&self.ideal_s_expression)
            .map_err(|e| format!("ideal_s_expression: {e}"))?;
        let ideal_answers = parse_answers(&self.ideal_answers)?;
        let mut rec = QuestionRecord::answerable(&self.qid, &self.question, ideal_lf, ideal_answers);
        let current = (&self.s_expression, &self.answers, self.status);
        match current {
            (None, None, None) => {
                if !self.causes.is_empty() || self.scenario.is_some_and(|s| s != Scenario::NotApplicable) {
                    return Err("causes or scenario given without current labels".into());
                }
            }
            (Some(lf), Some(answers), Some(status)) => {
                rec.current_lf = if lf == NK {
                    LfLabel::Nk
                } else {
                    LfLabel::Form(parse(lf).map_err(|e| format!("s_expression: {e}"))?)
                };
                rec.current_answers = answers.to_label()?;
                rec.status = status;
                rec.causes = self.causes.clone();
                rec.scenario = self.scenario.unwrap_or(Scenario::NotApplicable);
            }
            _ => return Err("s_expression, answers and status must be given together".into()),
        }
        let problems = rec.label_problems();
        if !problems.is_empty() {
            return Err(problems.join("; "));
        }
        Ok(rec)
    }
}

/// One prediction row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionLine {
    pub format_version: u32,
    pub qid: String,
    pub s_expression: String,
    pub answers: AnswersField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lf_score: Option<f64>,
}

impl PredictionLine {
    pub fn from_prediction(p: &Prediction) -> Self {
        PredictionLine {
            format_version: FORMAT_VERSION,
            qid: p.qid.clone(),
            s_expression: match &p.predicted_lf {
                PredictedLf::Nk => NK.to_string(),
                PredictedLf::Form(s) => s.clone(),
            },
            answers: AnswersField::from_label(&p.predicted_answers),
            entity_score: p.entity_score,
            lf_score: p.lf_score,
        }
    }

    pub fn to_prediction(&self) -> Result<Prediction, String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!("unsupported format_version {}", self.format_version));
        }
        let p = Prediction {
            qid: self.qid.clone(),
            predicted_lf: if self.s_expression == NK {
                PredictedLf::Nk
            } else {
                PredictedLf::Form(self.s_expression.clone())
            },
            predicted_answers: self.answers.to_label()?,
            entity_score: self.entity_score,
            lf_score: self.lf_score,
        };
        p.check().map_err(|e| e.to_string())?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSizes {
    pub facts: usize,
    pub entities: usize,
    pub relations: usize,
    pub types: usize,
    pub retagged: usize,
}

/// One drop-log row. Fact ids are tab-separated triples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropLogLine {
    pub format_version: u32,
    pub step: usize,
    pub kind: ElementKind,
    pub id: String,
    pub cause: Cause,
    pub cascade: CascadeSizes,
    pub newly_unanswerable: Vec<String>,
    pub revived: Vec<String>,
}

impl DropLogLine {
    pub fn from_entry(e: &DropLogEntry) -> Self {
        let c = &e.cascade;
        DropLogLine {
            format_version: FORMAT_VERSION,
            step: e.step,
            kind: e.element.kind(),
            id: e.element.id(),
            cause: e.cause,
            cascade: CascadeSizes {
                facts: c.removed_facts.len(),
                entities: c.removed_entities.len(),
                relations: c.removed_relations.len(),
                types: c.removed_types.len(),
                retagged: c.retagged_entities.len(),
            },
            newly_unanswerable: e.newly_unanswerable.clone(),
            revived: e.revived.clone(),
        }
    }

    pub fn element(&self) -> Result<ElementRef, String> {
        element_from_parts(self.kind, &self.id)
    }
}

pub fn element_from_parts(kind: ElementKind, id: &str) -> Result<ElementRef, String> {
    Ok(match kind {
        ElementKind::Type => ElementRef::Type(id.to_string()),
        ElementKind::Relation => ElementRef::Relation(id.to_string()),
        ElementKind::Entity => ElementRef::Entity(id.to_string()),
        ElementKind::Fact => {
            let parts: Vec<&str> = id.split('\t').collect();
            let [s, r, o] = parts[..] else {
                return Err(format!("fact id `{id}` is not a tab-separated triple"));
            };
            let object = match o.parse::<Answer>().map_err(|e| format!("fact object `{o}`: {e}"))? {
                Answer::Entity(e) => Object::Entity(e),
                Answer::Literal(l) => Object::Literal(l),
            };
            ElementRef::Fact(Fact::new(s, r, object))
        }
    })
}

/// Serializes rows, one JSON object per line.
pub fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("rows serialize"));
        out.push('\n');
    }
    out
}

/// Parses JSON lines; blank lines are skipped. `path` is used in messages.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &str) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line).map_err(|e| FormatError::Line {
            path: path.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path)
        .map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

fn convert_lines<L, T>(
    text: &str,
    path: &str,
    f: impl Fn(&L) -> Result<T, String>,
) -> Result<Vec<T>, FormatError>
where
    L: DeserializeOwned,
{
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: L = serde_json::from_str(line).map_err(|e| FormatError::Line {
            path: path.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(f(&row).map_err(|message| FormatError::Line { path: path.to_string(), line: i + 1, message })?);
    }
    Ok(out)
}

pub fn parse_dataset(text: &str, path: &str) -> Result<Vec<QuestionRecord>, FormatError> {
    let records = convert_lines(text, path, DatasetLine::to_record)?;
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.qid.as_str()) {
            return Err(FormatError::Line {
                path: path.to_string(),
                line: 0,
                message: format!("duplicate qid {}", r.qid),
            });
        }
    }
    Ok(records)
}

pub fn render_dataset(records: &[QuestionRecord]) -> String {
    to_jsonl(&records.iter().map(DatasetLine::from_record).collect::<Vec<_>>())
}

/// Question corpus: ideal fields only.
pub fn render_corpus(records: &[QuestionRecord]) -> String {
    let lines: Vec<DatasetLine> = records
        .iter()
        .map(|r| DatasetLine {
            s_expression: None,
            answers: None,
            status: None,
            causes: Vec::new(),
            scenario: None,
            ..DatasetLine::from_record(r)
        })
        .collect();
    to_jsonl(&lines)
}

pub fn parse_predictions(text: &str, path: &str) -> Result<Vec<Prediction>, FormatError> {
    convert_lines(text, path, PredictionLine::to_prediction)
}

pub fn render_predictions(preds: &[Prediction]) -> String {
    to_jsonl(&preds.iter().map(PredictionLine::from_prediction).collect::<Vec<_>>())
}

pub fn parse_drop_log(text: &str, path: &str) -> Result<Vec<(ElementRef, Cause)>, FormatError> {
    convert_lines(text, path, |l: &DropLogLine| {
        if l.format_version != FORMAT_VERSION {
            return Err(format!("unsupported format_version {}", l.format_version));
        }
        Ok((l.element()?, l.cause))
    })
}

pub fn render_drop_log(entries: &[DropLogEntry]) -> String {
    to_jsonl(&entries.iter().map(DropLogLine::from_entry).collect::<Vec<_>>())
}

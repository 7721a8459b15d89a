//! Question records and their answerability labels.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kb::ElementKind;
use crate::sexpr::{Answer, LogicalForm};

/// A logical form, or `NK` when no valid form exists on the current KB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LfLabel {
    Form(LogicalForm),
    Nk,
}

impl LfLabel {
    pub fn is_nk(&self) -> bool {
        matches!(self, LfLabel::Nk)
    }

    pub fn form(&self) -> Option<&LogicalForm> {
        match self {
            LfLabel::Form(lf) => Some(lf),
            LfLabel::Nk => None,
        }
    }
}

impl fmt::Display for LfLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LfLabel::Form(lf) => lf.fmt(f),
            LfLabel::Nk => f.write_str("NK"),
        }
    }
}

/// An answer set, or `NA` when the question has no answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnswerLabel {
    Set(BTreeSet<Answer>),
    Na,
}

impl AnswerLabel {
    pub fn is_na(&self) -> bool {
        matches!(self, AnswerLabel::Na)
    }

    pub fn set(&self) -> Option<&BTreeSet<Answer>> {
        match self {
            AnswerLabel::Set(s) => Some(s),
            AnswerLabel::Na => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Answerable,
    Unanswerable,
}

/// Kind of drop that made a question unanswerable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    TypeDrop,
    RelationDrop,
    EntityDrop,
    FactDrop,
}

impl Cause {
    /// Phase order used when combining drops.
    pub const ALL: [Cause; 4] = [
        Cause::TypeDrop,
        Cause::RelationDrop,
        Cause::EntityDrop,
        Cause::FactDrop,
    ];

    pub fn for_kind(kind: ElementKind) -> Cause {
        match kind {
            ElementKind::Type => Cause::TypeDrop,
            ElementKind::Relation => Cause::RelationDrop,
            ElementKind::Entity => Cause::EntityDrop,
            ElementKind::Fact => Cause::FactDrop,
        }
    }

    pub fn kind(self) -> ElementKind {
        match self {
            Cause::TypeDrop => ElementKind::Type,
            Cause::RelationDrop => ElementKind::Relation,
            Cause::EntityDrop => ElementKind::Entity,
            Cause::FactDrop => ElementKind::Fact,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cause::TypeDrop => "type_drop",
            Cause::RelationDrop => "relation_drop",
            Cause::EntityDrop => "entity_drop",
            Cause::FactDrop => "fact_drop",
        }
    }
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Cause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cause::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown cause `{s}`"))
    }
}

/// Test scenario of an unanswerable question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Iid,
    PartialZeroShot,
    FullZeroShot,
    NotApplicable,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Iid => "iid",
            Scenario::PartialZeroShot => "partial_zero_shot",
            Scenario::FullZeroShot => "full_zero_shot",
            Scenario::NotApplicable => "not_applicable",
        }
    }

    pub fn is_zero_shot(self) -> bool {
        matches!(self, Scenario::PartialZeroShot | Scenario::FullZeroShot)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Scenario::Iid,
            Scenario::PartialZeroShot,
            Scenario::FullZeroShot,
            Scenario::NotApplicable,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// One question with its ideal and current labels.
///
/// `causes` keeps the order in which drops hit the question; the first
/// entry is the primary cause used for quotas and reporting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuestionRecord {
    pub qid: String,
    pub question: String,
    pub ideal_lf: LogicalForm,
    pub ideal_answers: BTreeSet<Answer>,
    pub current_lf: LfLabel,
    pub current_answers: AnswerLabel,
    pub status: Status,
    pub causes: Vec<Cause>,
    pub scenario: Scenario,
}

impl QuestionRecord {
    /// A fresh answerable record whose current labels equal the ideal ones.
    pub fn answerable(
        qid: impl Into<String>,
        question: impl Into<String>,
        ideal_lf: LogicalForm,
        ideal_answers: BTreeSet<Answer>,
    ) -> Self {
        QuestionRecord {
            qid: qid.into(),
            question: question.into(),
            current_lf: LfLabel::Form(ideal_lf.clone()),
            current_answers: AnswerLabel::Set(ideal_answers.clone()),
            ideal_lf,
            ideal_answers,
            status: Status::Answerable,
            causes: Vec::new(),
            scenario: Scenario::NotApplicable,
        }
    }

    /// Restores the current labels to the ideal ones.
    pub fn reset(&mut self) {
        self.current_lf = LfLabel::Form(self.ideal_lf.clone());
        self.current_answers = AnswerLabel::Set(self.ideal_answers.clone());
        self.status = Status::Answerable;
        self.causes.clear();
        self.scenario = Scenario::NotApplicable;
    }

    pub fn is_answerable(&self) -> bool {
        self.status == Status::Answerable
    }

    pub fn primary_cause(&self) -> Option<Cause> {
        self.causes.first().copied()
    }

    /// Checks the label invariants of a single record.
    pub fn label_problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.status {
            Status::Answerable => {
                if self.current_lf.is_nk() {
                    out.push("answerable record labelled NK".to_string());
                }
                match &self.current_answers {
                    AnswerLabel::Na => out.push("answerable record labelled NA".to_string()),
                    AnswerLabel::Set(s) if s.is_empty() => {
                        out.push("answerable record with empty answers".to_string())
                    }
                    AnswerLabel::Set(_) => {}
                }
                if !self.causes.is_empty() {
                    out.push("answerable record carries causes".to_string());
                }
            }
            Status::Unanswerable => {
                if !self.current_answers.is_na() {
                    out.push("unanswerable record without NA".to_string());
                }
                if self.causes.is_empty() {
                    out.push("unanswerable record without a cause".to_string());
                }
            }
        }
        if self.ideal_answers.is_empty() {
            out.push("empty ideal answers".to_string());
        }
        out
    }
}

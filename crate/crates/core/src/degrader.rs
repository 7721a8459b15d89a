//! Iterative, sampled knowledge-base degradation.
//!
//! Elements are sampled from the current KB with weight
//! `importance / popularity`, where popularity is read from the ideal KB and
//! importance counts the still-answerable questions a drop would touch. Each
//! drop relabels the questions it touches (NK when the logical form cites a
//! removed element, NA when the answer set becomes empty) and is recorded
//! in a drop log that can be replayed.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{AnswerLabel, Cause, LfLabel, QuestionRecord, Status};
use crate::kb::{DropCascade, ElementKind, ElementRef, Fact, KbError, KnowledgeBase};
use crate::sexpr::{execute, Answer, ExecError, Execution};

#[derive(Debug, Error)]
pub enum DegradeError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("question {qid}: {source}")]
    Exec { qid: String, source: ExecError },
    #[error("question {qid} is not answerable on the ideal KB: {reason}")]
    InvalidCorpus { qid: String, reason: String },
    #[error("duplicate question id {0}")]
    DuplicateQid(String),
    #[error("invalid degrade config: {0}")]
    Config(String),
    #[error("no {0} has positive importance")]
    Exhausted(ElementKind),
    #[error("cause {cause} does not match {element}")]
    CauseMismatch { element: ElementRef, cause: Cause },
    #[error("phase audit found stale labels for {0:?}")]
    AuditMismatch(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegradeConfig {
    pub target_unanswerable_fraction: f64,
    pub per_cause_fractions: BTreeMap<Cause, f64>,
    pub seed: u64,
    /// Upper bound on drops per phase.
    pub max_steps: usize,
}

impl DegradeConfig {
    /// Splits `p_u` equally over the four causes.
    pub fn equal_split(p_u: f64, seed: u64) -> Self {
        DegradeConfig {
            target_unanswerable_fraction: p_u,
            per_cause_fractions: Cause::ALL.into_iter().map(|c| (c, p_u / 4.0)).collect(),
            seed,
            max_steps: 10_000,
        }
    }

    pub fn fraction(&self, cause: Cause) -> f64 {
        self.per_cause_fractions.get(&cause).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), DegradeError> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.target_unanswerable_fraction) {
            return Err(DegradeError::Config(format!(
                "target fraction {} outside [0, 1]",
                self.target_unanswerable_fraction
            )));
        }
        if let Some((c, f)) = self.per_cause_fractions.iter().find(|(_, f)| !in_unit(**f)) {
            return Err(DegradeError::Config(format!(
                "{c} fraction {f} outside [0, 1]"
            )));
        }
        let sum: f64 = self.per_cause_fractions.values().sum();
        if (sum - self.target_unanswerable_fraction).abs() > 1e-9 {
            return Err(DegradeError::Config(format!(
                "per-cause fractions sum to {sum}, target is {}",
                self.target_unanswerable_fraction
            )));
        }
        Ok(())
    }
}

/// One applied drop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropLogEntry {
    pub step: usize,
    pub element: ElementRef,
    pub cause: Cause,
    pub cascade: DropCascade,
    pub newly_unanswerable: Vec<String>,
    /// Unanswerable questions whose answers came back.
    pub revived: Vec<String>,
}

/// Outcome of one degradation phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseSummary {
    pub cause: Cause,
    pub target: usize,
    pub achieved: usize,
    pub steps: usize,
    pub exhausted: bool,
    pub hit_max_steps: bool,
}

impl PhaseSummary {
    pub fn reached(&self) -> bool {
        self.achieved >= self.target
    }
}

type ElementIndex = BTreeMap<ElementRef, BTreeSet<usize>>;

#[derive(Clone, Debug)]
pub struct DegradeState {
    kb: KnowledgeBase,
    ideal_kb: KnowledgeBase,
    questions: Vec<QuestionRecord>,
    drop_log: Vec<DropLogEntry>,
    phases: Vec<PhaseSummary>,
    support: Vec<BTreeSet<Fact>>,
    ideal_support: Vec<BTreeSet<Fact>>,
    index: ElementIndex,
    ideal_index: ElementIndex,
}

fn keys(
    lf_elements: Vec<ElementRef>,
    support: &BTreeSet<Fact>,
    answers: &BTreeSet<Answer>,
) -> Vec<ElementRef> {
    let mut out = lf_elements;
    out.extend(support.iter().cloned().map(ElementRef::Fact));
    out.extend(answers.iter().filter_map(|a| match a {
        Answer::Entity(e) => Some(ElementRef::Entity(e.clone())),
        Answer::Literal(_) => None,
    }));
    out
}

fn insert_keys(index: &mut ElementIndex, i: usize, keys: Vec<ElementRef>) {
    for k in keys {
        index.entry(k).or_default().insert(i);
    }
}

fn remove_keys(index: &mut ElementIndex, i: usize, keys: Vec<ElementRef>) {
    for k in keys {
        if let Some(set) = index.get_mut(&k) {
            set.remove(&i);
            if set.is_empty() {
                index.remove(&k);
            }
        }
    }
}

/// Everything a cascade touches: removed elements plus retagged entities.
fn touched(cascade: &DropCascade) -> Vec<ElementRef> {
    let mut out = cascade.removed_elements();
    out.extend(
        cascade
            .retagged_entities
            .iter()
            .cloned()
            .map(ElementRef::Entity),
    );
    out
}

impl DegradeState {
    /// Starts from the ideal KB. Every question must validate and execute to
    /// its stored, nonempty ideal answers.
    pub fn new(
        ideal_kb: KnowledgeBase,
        questions: Vec<QuestionRecord>,
    ) -> Result<Self, DegradeError> {
        let mut seen = BTreeSet::new();
        let mut questions = questions;
        let mut ideal_support = Vec::with_capacity(questions.len());
        for q in &mut questions {
            if !seen.insert(q.qid.clone()) {
                return Err(DegradeError::DuplicateQid(q.qid.clone()));
            }
            let invalid = |reason: String| DegradeError::InvalidCorpus {
                qid: q.qid.clone(),
                reason,
            };
            let report = q.ideal_lf.validate(&ideal_kb);
            if !report.valid {
                let missing: Vec<String> = report.missing.iter().map(ToString::to_string).collect();
                return Err(invalid(format!("cites missing {}", missing.join(", "))));
            }
            let exec = execute(&q.ideal_lf, &ideal_kb).map_err(|e| invalid(e.to_string()))?;
            if exec.is_empty() {
                return Err(invalid("empty answer".into()));
            }
            if exec.answers != q.ideal_answers {
                return Err(invalid("stored ideal answers differ from execution".into()));
            }
            q.reset();
            ideal_support.push(exec.support());
        }
        let support = ideal_support.clone();
        let mut state = DegradeState {
            kb: ideal_kb.clone(),
            ideal_kb,
            questions,
            drop_log: Vec::new(),
            phases: Vec::new(),
            support,
            ideal_support,
            index: ElementIndex::new(),
            ideal_index: ElementIndex::new(),
        };
        state.index = state.rebuilt_index();
        for (i, q) in state.questions.iter().enumerate() {
            insert_keys(
                &mut state.ideal_index,
                i,
                keys(
                    q.ideal_lf.elements(),
                    &state.ideal_support[i],
                    &q.ideal_answers,
                ),
            );
        }
        Ok(state)
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn ideal_kb(&self) -> &KnowledgeBase {
        &self.ideal_kb
    }

    pub fn questions(&self) -> &[QuestionRecord] {
        &self.questions
    }

    pub fn drop_log(&self) -> &[DropLogEntry] {
        &self.drop_log
    }

    pub fn phases(&self) -> &[PhaseSummary] {
        &self.phases
    }

    /// Facts supporting the current answers of question `i`.
    pub fn support(&self, i: usize) -> &BTreeSet<Fact> {
        &self.support[i]
    }

    /// Facts supporting the ideal answers of question `i`.
    pub fn ideal_support(&self, i: usize) -> &BTreeSet<Fact> {
        &self.ideal_support[i]
    }

    /// Element -> indices of still-answerable questions citing it in their
    /// logical form, support paths or answers.
    pub fn index(&self) -> &BTreeMap<ElementRef, BTreeSet<usize>> {
        &self.index
    }

    pub fn rebuilt_index(&self) -> BTreeMap<ElementRef, BTreeSet<usize>> {
        let mut index = ElementIndex::new();
        for i in 0..self.questions.len() {
            insert_keys(&mut index, i, self.current_keys(i));
        }
        index
    }

    pub fn into_parts(self) -> (KnowledgeBase, Vec<QuestionRecord>, Vec<DropLogEntry>) {
        (self.kb, self.questions, self.drop_log)
    }

    fn current_keys(&self, i: usize) -> Vec<ElementRef> {
        let q = &self.questions[i];
        match (&q.status, &q.current_lf, &q.current_answers) {
            (Status::Answerable, LfLabel::Form(lf), AnswerLabel::Set(answers)) => {
                keys(lf.elements(), &self.support[i], answers)
            }
            _ => Vec::new(),
        }
    }

    /// Number of questions whose primary cause is `cause`.
    pub fn cause_count(&self, cause: Cause) -> usize {
        self.questions
            .iter()
            .filter(|q| q.primary_cause() == Some(cause))
            .count()
    }

    pub fn unanswerable_count(&self) -> usize {
        self.questions.iter().filter(|q| !q.is_answerable()).count()
    }

    fn affected_by(&self, cascade: &DropCascade) -> BTreeSet<usize> {
        touched(cascade)
            .iter()
            .filter_map(|g| self.index.get(g))
            .flatten()
            .copied()
            .collect()
    }

    /// Still-answerable questions whose logical form, answers or support
    /// paths would be touched by dropping `g`.
    pub fn importance(&self, g: &ElementRef) -> Result<usize, KbError> {
        Ok(self.affected_by(&self.kb.cascade_of(g)?).len())
    }

    fn candidates(&self, kind: ElementKind) -> Vec<ElementRef> {
        match kind {
            ElementKind::Type => self
                .kb
                .types()
                .keys()
                .filter(|t| self.kb.is_leaf_type(t))
                .cloned()
                .map(ElementRef::Type)
                .collect(),
            ElementKind::Relation => self
                .kb
                .relations()
                .keys()
                .cloned()
                .map(ElementRef::Relation)
                .collect(),
            ElementKind::Entity => self
                .kb
                .entities()
                .keys()
                .cloned()
                .map(ElementRef::Entity)
                .collect(),
            ElementKind::Fact => self
                .kb
                .facts()
                .iter()
                .cloned()
                .map(ElementRef::Fact)
                .collect(),
        }
    }

    /// Candidates of `kind` with positive importance, paired with importance.
    fn weighted_candidates(&self, kind: ElementKind) -> Result<Vec<(ElementRef, usize)>, KbError> {
        let mut out = Vec::new();
        for g in self.candidates(kind) {
            let imp = self.importance(&g)?;
            if imp > 0 {
                out.push((g, imp));
            }
        }
        Ok(out)
    }

    fn draw(
        &self,
        pool: Vec<(ElementRef, usize)>,
        rng: &mut impl Rng,
    ) -> Result<ElementRef, DegradeError> {
        let mut weights = Vec::with_capacity(pool.len());
        for (g, imp) in &pool {
            let pop = self.ideal_kb.popularity(g)?.max(1);
            weights.push(*imp as f64 / pop as f64);
        }
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        Ok(pool[dist.sample(rng)].0.clone())
    }

    /// Samples an element of `kind` with weight importance / popularity
    /// among elements of positive importance.
    pub fn sample_candidate(
        &self,
        kind: ElementKind,
        rng: &mut impl Rng,
    ) -> Result<ElementRef, DegradeError> {
        let pool = self.weighted_candidates(kind)?;
        if pool.is_empty() {
            return Err(DegradeError::Exhausted(kind));
        }
        self.draw(pool, rng)
    }

    /// Like [`sample_candidate`](Self::sample_candidate), but prefers
    /// elements whose importance does not exceed `cap`. When none qualifies
    /// the draw is restricted to the least important candidates.
    pub fn sample_candidate_capped(
        &self,
        kind: ElementKind,
        cap: usize,
        rng: &mut impl Rng,
    ) -> Result<ElementRef, DegradeError> {
        let pool = self.weighted_candidates(kind)?;
        let Some(least) = pool.iter().map(|(_, imp)| *imp).min() else {
            return Err(DegradeError::Exhausted(kind));
        };
        let limit = if least <= cap { cap } else { least };
        let pool = pool.into_iter().filter(|(_, imp)| *imp <= limit).collect();
        self.draw(pool, rng)
    }

    /// Types whose extension contains `entity`, ancestors included.
    fn types_of(&self, entity: &str) -> Vec<ElementRef> {
        let mut out: BTreeSet<&str> = BTreeSet::new();
        let mut todo: Vec<&str> = match self.kb.entities().get(entity) {
            Some(decl) => decl.types.iter().map(String::as_str).collect(),
            None => Vec::new(),
        };
        while let Some(t) = todo.pop() {
            if out.insert(t) {
                todo.extend(self.kb.types()[t].parents.iter().map(String::as_str));
            }
        }
        out.into_iter()
            .map(|t| ElementRef::Type(t.to_string()))
            .collect()
    }

    fn reexecute(&self, i: usize) -> Result<Execution, DegradeError> {
        let q = &self.questions[i];
        execute(&q.ideal_lf, &self.kb).map_err(|source| DegradeError::Exec {
            qid: q.qid.clone(),
            source,
        })
    }

    /// Drops `g` and relabels affected questions. Returns the qids that
    /// became unanswerable.
    pub fn apply_labeled_drop(
        &mut self,
        g: &ElementRef,
        cause: Cause,
    ) -> Result<Vec<String>, DegradeError> {
        if Cause::for_kind(g.kind()) != cause {
            return Err(DegradeError::CauseMismatch {
                element: g.clone(),
                cause,
            });
        }
        // a removed entity can leave a type's extension without touching
        // any answer or path, e.g. under COUNT
        let member_of = match g {
            ElementRef::Entity(e) => self.types_of(e),
            _ => Vec::new(),
        };
        let cascade = self.kb.apply_drop(g)?;
        let affected: BTreeSet<usize> = if cascade.removed_types.is_empty() {
            let mut affected = self.affected_by(&cascade);
            affected.extend(
                member_of
                    .iter()
                    .filter_map(|t| self.index.get(t))
                    .flatten()
                    .copied(),
            );
            affected
        } else {
            // retagging can change type membership anywhere
            (0..self.questions.len())
                .filter(|&i| self.questions[i].is_answerable())
                .collect()
        };
        let touched = touched(&cascade);
        let already_hit: BTreeSet<usize> = touched
            .iter()
            .filter_map(|x| self.ideal_index.get(x))
            .flatten()
            .copied()
            .filter(|&i| !self.questions[i].is_answerable())
            .collect();

        // extremum operators are not monotone: a drop can give an NA
        // question its answers back
        let dormant: Vec<usize> = (0..self.questions.len())
            .filter(|&i| {
                let q = &self.questions[i];
                !q.is_answerable()
                    && !q.current_lf.is_nk()
                    && q.ideal_lf.root().has_non_monotone_operator()
            })
            .collect();

        let mut newly = Vec::new();
        for i in affected {
            let old_keys = self.current_keys(i);
            let valid = self.questions[i].ideal_lf.validate(&self.kb).valid;
            let exec = if valid {
                Some(self.reexecute(i)?)
            } else {
                None
            };
            let q = &mut self.questions[i];
            match exec {
                None => {
                    q.current_lf = LfLabel::Nk;
                    q.current_answers = AnswerLabel::Na;
                }
                Some(exec) if exec.is_empty() => q.current_answers = AnswerLabel::Na,
                Some(exec) => {
                    self.support[i] = exec.support();
                    q.current_answers = AnswerLabel::Set(exec.answers);
                }
            }
            if q.current_answers.is_na() {
                q.status = Status::Unanswerable;
                q.causes.push(cause);
                self.support[i].clear();
                newly.push(q.qid.clone());
            }
            remove_keys(&mut self.index, i, old_keys);
            let new_keys = self.current_keys(i);
            insert_keys(&mut self.index, i, new_keys);
        }
        let mut revived = Vec::new();
        for i in dormant {
            if !self.questions[i].ideal_lf.validate(&self.kb).valid {
                continue;
            }
            let exec = self.reexecute(i)?;
            if exec.is_empty() {
                continue;
            }
            let q = &mut self.questions[i];
            q.status = Status::Answerable;
            q.causes.clear();
            self.support[i] = exec.support();
            q.current_answers = AnswerLabel::Set(exec.answers);
            revived.push(q.qid.clone());
            let new_keys = self.current_keys(i);
            insert_keys(&mut self.index, i, new_keys);
        }
        for i in already_hit {
            if self.questions[i].is_answerable() {
                continue;
            }
            let valid = self.questions[i].ideal_lf.validate(&self.kb).valid;
            let q = &mut self.questions[i];
            if !valid {
                q.current_lf = LfLabel::Nk;
            }
            if !q.causes.contains(&cause) {
                q.causes.push(cause);
            }
        }
        self.drop_log.push(DropLogEntry {
            step: self.drop_log.len(),
            element: g.clone(),
            cause,
            cascade,
            newly_unanswerable: newly.clone(),
            revived,
        });
        Ok(newly)
    }

    /// Recomputes every label from scratch and lists the qids whose stored
    /// labels, answers or support disagree.
    pub fn audit(&self) -> Vec<String> {
        let mut stale = Vec::new();
        for (i, q) in self.questions.iter().enumerate() {
            let valid = q.ideal_lf.validate(&self.kb).valid;
            let exec = if valid {
                execute(&q.ideal_lf, &self.kb).ok()
            } else {
                None
            };
            let ok = match (&exec, &q.current_lf, &q.current_answers) {
                (None, LfLabel::Nk, AnswerLabel::Na) => !valid,
                (Some(e), LfLabel::Form(_), AnswerLabel::Na) => e.is_empty(),
                (Some(e), LfLabel::Form(_), AnswerLabel::Set(a)) => {
                    !e.is_empty() && e.answers == *a && e.support() == self.support[i]
                }
                _ => false,
            };
            if !ok || !q.label_problems().is_empty() {
                stale.push(q.qid.clone());
            }
        }
        if self.index != self.rebuilt_index() {
            stale.push("<index>".to_string());
        }
        stale
    }
}

/// Runs the type, relation, entity and fact phases in order.
pub fn run_degrade(
    questions: Vec<QuestionRecord>,
    ideal_kb: KnowledgeBase,
    config: &DegradeConfig,
) -> Result<DegradeState, DegradeError> {
    config.validate()?;
    let mut state = DegradeState::new(ideal_kb, questions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = state.questions.len() as f64;
    for cause in Cause::ALL {
        let target = (config.fraction(cause) * n - 1e-9).ceil().max(0.0) as usize;
        let mut summary = PhaseSummary {
            cause,
            target,
            achieved: 0,
            steps: 0,
            exhausted: false,
            hit_max_steps: false,
        };
        loop {
            summary.achieved = state.cause_count(cause);
            if summary.achieved >= target {
                break;
            }
            if summary.steps >= config.max_steps {
                summary.hit_max_steps = true;
                warn!(
                    "{cause}: stopped after {} steps at {}/{target}",
                    summary.steps, summary.achieved
                );
                break;
            }
            let g = match state.sample_candidate_capped(
                cause.kind(),
                target - summary.achieved,
                &mut rng,
            ) {
                Ok(g) => g,
                Err(DegradeError::Exhausted(_)) => {
                    summary.exhausted = true;
                    warn!(
                        "{cause}: no candidate left at {}/{target}",
                        summary.achieved
                    );
                    break;
                }
                Err(e) => return Err(e),
            };
            state.apply_labeled_drop(&g, cause)?;
            summary.steps += 1;
        }
        let stale = state.audit();
        if !stale.is_empty() {
            return Err(DegradeError::AuditMismatch(stale));
        }
        state.phases.push(summary);
    }
    Ok(state)
}

/// Re-applies a drop log to the ideal inputs.
pub fn replay<'a, I>(
    questions: Vec<QuestionRecord>,
    ideal_kb: KnowledgeBase,
    drops: I,
) -> Result<DegradeState, DegradeError>
where
    I: IntoIterator<Item = (&'a ElementRef, Cause)>,
{
    let mut state = DegradeState::new(ideal_kb, questions)?;
    for (g, cause) in drops {
        state.apply_labeled_drop(g, cause)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests;

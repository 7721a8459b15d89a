//! Train/dev/test construction with iid and zero-shot unanswerable test
//! scenarios.
//!
//! Zero-shot questions are chosen first by sampling dropped schema elements
//! `g_d` and collecting the unanswerable questions whose ideal form cites
//! them. Leftover questions citing a selected `g_d` are removed so that no
//! training question mentions it. The rest is split into train and iid test,
//! and the test side is carved 2:1 into test and dev.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{Cause, QuestionRecord, Scenario, Status};
use crate::kb::{ElementRef, Fact, KnowledgeBase};
use crate::sexpr::{execute, LogicalForm};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("invalid split config: {0}")]
    Config(String),
    #[error("question {0} is answerable; only unanswerable questions have a scenario")]
    Answerable(String),
    #[error("question {qid}: ideal form does not execute on the ideal KB: {reason}")]
    Ideal { qid: String, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitConfig {
    pub train: f64,
    pub test: f64,
    pub dev: f64,
    /// Shares of the test-side unanswerable questions.
    pub iid: f64,
    pub partial_zero_shot: f64,
    pub full_zero_shot: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 0.7,
            test: 0.2,
            dev: 0.1,
            iid: 0.5,
            partial_zero_shot: 0.375,
            full_zero_shot: 0.125,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), SplitError> {
        let all = [
            self.train,
            self.test,
            self.dev,
            self.iid,
            self.partial_zero_shot,
            self.full_zero_shot,
        ];
        if all.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(SplitError::Config("fractions must lie in [0, 1]".into()));
        }
        if (self.train + self.test + self.dev - 1.0).abs() > 1e-9 {
            return Err(SplitError::Config("train + test + dev must be 1".into()));
        }
        if (self.iid + self.partial_zero_shot + self.full_zero_shot - 1.0).abs() > 1e-9 {
            return Err(SplitError::Config("iid + partial + full must be 1".into()));
        }
        Ok(())
    }

    fn test_side(&self) -> f64 {
        self.test + self.dev
    }
}

/// Schema elements cited by `lf` that `kb` lacks.
pub fn missing_schema_elements(lf: &LogicalForm, kb: &KnowledgeBase) -> BTreeSet<ElementRef> {
    lf.schema_elements()
        .into_iter()
        .filter(|g| !kb.contains(g))
        .collect()
}

/// Scenario of an unanswerable question.
///
/// `M` is the set of types and relations cited by the ideal form and
/// missing from the degraded KB, and `U` the part of `M` no training
/// unanswerable question has seen missing. Empty `U` gives iid; `U` covering
/// every schema element of the form gives full zero-shot; anything else is
/// partial zero-shot. The remaining elements are normally ones seen in
/// answerable training questions, but forms mixing unseen-missing elements
/// with elements seen neither way are also classed partial, so
/// `_train_answerable_seen` never changes the outcome.
pub fn classify_scenario(
    record: &QuestionRecord,
    train_unanswerable_missing: &BTreeSet<ElementRef>,
    _train_answerable_seen: &BTreeSet<ElementRef>,
    degraded_kb: &KnowledgeBase,
) -> Result<Scenario, SplitError> {
    if record.status == Status::Answerable {
        return Err(SplitError::Answerable(record.qid.clone()));
    }
    let unseen: BTreeSet<ElementRef> = missing_schema_elements(&record.ideal_lf, degraded_kb)
        .into_iter()
        .filter(|g| !train_unanswerable_missing.contains(g))
        .collect();
    if unseen.is_empty() {
        return Ok(Scenario::Iid);
    }
    let schema = record.ideal_lf.schema_elements();
    if schema.iter().all(|g| unseen.contains(g)) {
        return Ok(Scenario::FullZeroShot);
    }
    Ok(Scenario::PartialZeroShot)
}

/// Elements seen missing by training unanswerable questions and elements
/// cited by training answerable questions.
pub fn train_element_sets(
    train: &[QuestionRecord],
    degraded_kb: &KnowledgeBase,
) -> (BTreeSet<ElementRef>, BTreeSet<ElementRef>) {
    let mut missing = BTreeSet::new();
    let mut seen = BTreeSet::new();
    for q in train {
        match q.status {
            Status::Unanswerable => {
                missing.extend(missing_schema_elements(&q.ideal_lf, degraded_kb))
            }
            Status::Answerable => seen.extend(q.ideal_lf.schema_elements()),
        }
    }
    (missing, seen)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ScenarioCounts {
    pub iid: usize,
    pub partial_zero_shot: usize,
    pub full_zero_shot: usize,
}

impl ScenarioCounts {
    pub fn total(&self) -> usize {
        self.iid + self.partial_zero_shot + self.full_zero_shot
    }

    fn add(&mut self, s: Scenario) {
        match s {
            Scenario::Iid => self.iid += 1,
            Scenario::PartialZeroShot => self.partial_zero_shot += 1,
            Scenario::FullZeroShot => self.full_zero_shot += 1,
            Scenario::NotApplicable => {}
        }
    }
}

/// Targets and achieved values, for the split manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SplitSummary {
    pub input_questions: usize,
    pub target_fractions: [f64; 3],
    pub achieved_fractions: [f64; 3],
    pub target_unanswerable_test_side: ScenarioCounts,
    pub achieved_unanswerable_test_side: ScenarioCounts,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplits {
    pub train: Vec<QuestionRecord>,
    pub dev: Vec<QuestionRecord>,
    pub test: Vec<QuestionRecord>,
    pub zero_shot_elements: BTreeSet<ElementRef>,
    pub removed_for_leakage: Vec<String>,
    /// Training questions whose ideal support paths use facts tied to a
    /// zero-shot element, flagged but kept.
    pub path_leaks: BTreeMap<ElementRef, Vec<String>>,
    pub summary: SplitSummary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Place {
    Open,
    ZeroShot,
    Removed,
    Iid,
    TrainSide,
    TestSide,
}

const ZERO_SHOT_ATTEMPTS: usize = 16;

fn quota(total: usize, fraction: f64) -> usize {
    (total as f64 * fraction).round() as usize
}

/// Builds train/dev/test splits from degraded questions.
///
/// `G_d` is the set of types and relations of `ideal_kb` absent from
/// `degraded_kb`.
pub fn build_splits(
    questions: &[QuestionRecord],
    degraded_kb: &KnowledgeBase,
    ideal_kb: &KnowledgeBase,
    config: &SplitConfig,
) -> Result<DatasetSplits, SplitError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = questions.len();
    let mut place = vec![Place::Open; n];
    let mut warnings = Vec::new();
    let missing: Vec<BTreeSet<ElementRef>> = questions
        .iter()
        .map(|q| missing_schema_elements(&q.ideal_lf, degraded_kb))
        .collect();
    let unanswerable: Vec<usize> = (0..n)
        .filter(|&i| questions[i].status == Status::Unanswerable)
        .collect();

    let side_u = quota(unanswerable.len(), config.test_side());
    let target = ScenarioCounts {
        iid: quota(side_u, config.iid),
        partial_zero_shot: quota(side_u, config.partial_zero_shot),
        full_zero_shot: quota(side_u, config.full_zero_shot),
    };

    // 1. zero-shot pools
    let mut dropped: Vec<ElementRef> = ideal_kb
        .types()
        .keys()
        .cloned()
        .map(ElementRef::Type)
        .chain(
            ideal_kb
                .relations()
                .keys()
                .cloned()
                .map(ElementRef::Relation),
        )
        .filter(|g| !degraded_kb.contains(g))
        .filter(|g| {
            unanswerable
                .iter()
                .any(|&i| questions[i].ideal_lf.contains_element(g))
        })
        .collect();
    if unanswerable.is_empty() {
        warnings.push("no unanswerable questions; zero-shot pools are empty".to_string());
    }
    // a greedy pass depends on the candidate order; keep the best of a few
    let mut best: Option<(usize, Vec<Place>, BTreeSet<ElementRef>, ScenarioCounts)> = None;
    for _ in 0..ZERO_SHOT_ATTEMPTS {
        dropped.shuffle(&mut rng);
        let mut place = place.clone();
        // A candidate g is taken with exact scenarios: once g is selected, every
        // open question citing a selected element leaves the train side, so the
        // elements train still sees missing are known before any question moves.
        let mut zero_shot: BTreeSet<ElementRef> = BTreeSet::new();
        let mut got = ScenarioCounts::default();
        let mut pooled: Vec<usize> = Vec::new();
        for g in &dropped {
            if got.partial_zero_shot >= target.partial_zero_shot
                && got.full_zero_shot >= target.full_zero_shot
            {
                break;
            }
            let mut selected = zero_shot.clone();
            selected.insert(g.clone());
            let cites_selected = |i: usize| {
                selected
                    .iter()
                    .any(|e| questions[i].ideal_lf.contains_element(e))
            };
            let seen_missing: BTreeSet<&ElementRef> = unanswerable
                .iter()
                .filter(|&&i| place[i] == Place::Open && !cites_selected(i))
                .flat_map(|&i| missing[i].iter())
                .collect();
            let is_full = |i: usize| {
                let unseen: Vec<&ElementRef> = missing[i]
                    .iter()
                    .filter(|m| !seen_missing.contains(m))
                    .collect();
                !unseen.is_empty()
                    && questions[i]
                        .ideal_lf
                        .schema_elements()
                        .iter()
                        .all(|e| unseen.contains(&e))
            };
            let mut counts = ScenarioCounts::default();
            for &i in &pooled {
                if is_full(i) {
                    counts.full_zero_shot += 1;
                } else {
                    counts.partial_zero_shot += 1;
                }
            }
            if counts.full_zero_shot > target.full_zero_shot
                || counts.partial_zero_shot > target.partial_zero_shot
            {
                continue;
            }
            let mut group: Vec<usize> = unanswerable
                .iter()
                .copied()
                .filter(|&i| place[i] == Place::Open && questions[i].ideal_lf.contains_element(g))
                .collect();
            group.shuffle(&mut rng);
            let mut took = Vec::new();
            for i in group {
                if is_full(i) {
                    if counts.full_zero_shot < target.full_zero_shot {
                        counts.full_zero_shot += 1;
                        took.push(i);
                    }
                } else if counts.partial_zero_shot < target.partial_zero_shot {
                    counts.partial_zero_shot += 1;
                    took.push(i);
                }
            }
            if took.is_empty() {
                continue;
            }
            for &i in &took {
                place[i] = Place::ZeroShot;
            }
            pooled.extend(took);
            got = counts;
            zero_shot.insert(g.clone());
            // questions citing g can no longer train; mark them now so later
            // candidates see the right coverage
            for &i in &unanswerable {
                if place[i] == Place::Open && questions[i].ideal_lf.contains_element(g) {
                    place[i] = Place::Removed;
                }
            }
        }
        let short = target.partial_zero_shot - got.partial_zero_shot + target.full_zero_shot
            - got.full_zero_shot;
        if best.as_ref().map_or(true, |b| short < b.0) {
            best = Some((short, place, zero_shot, got));
        }
        if short == 0 {
            break;
        }
    }
    let (_, best_place, zero_shot, got) = best.expect("at least one attempt");
    place = best_place;
    if got.partial_zero_shot < target.partial_zero_shot
        || got.full_zero_shot < target.full_zero_shot
    {
        warnings.push(format!(
            "zero-shot pools short of target: partial {}/{}, full {}/{}",
            got.partial_zero_shot,
            target.partial_zero_shot,
            got.full_zero_shot,
            target.full_zero_shot
        ));
    }

    // 2. leakage removal
    let mut removed_for_leakage = Vec::new();
    for i in 0..n {
        let leaks = zero_shot
            .iter()
            .any(|g| questions[i].ideal_lf.contains_element(g));
        if leaks && place[i] == Place::Open {
            place[i] = Place::Removed;
        }
        if place[i] == Place::Removed {
            removed_for_leakage.push(questions[i].qid.clone());
        }
    }

    // 3. iid test questions, keeping every missing element they cite seen in train
    let mut rest: Vec<usize> = unanswerable
        .iter()
        .copied()
        .filter(|&i| place[i] == Place::Open)
        .collect();
    rest.shuffle(&mut rng);
    let mut cover: BTreeMap<&ElementRef, usize> = BTreeMap::new();
    for &i in &rest {
        for m in &missing[i] {
            *cover.entry(m).or_default() += 1;
        }
    }
    let mut iid = 0;
    for &i in &rest {
        if iid < target.iid && missing[i].iter().all(|m| cover[m] >= 2) {
            for m in &missing[i] {
                *cover.get_mut(m).unwrap() -= 1;
            }
            place[i] = Place::Iid;
            iid += 1;
        } else {
            place[i] = Place::TrainSide;
        }
    }
    if iid < target.iid {
        warnings.push(format!(
            "iid test questions short of target: {iid}/{}",
            target.iid
        ));
    }

    let mut answerable: Vec<usize> = (0..n)
        .filter(|&i| questions[i].status == Status::Answerable)
        .collect();
    answerable.shuffle(&mut rng);
    let surviving = n - removed_for_leakage.len();
    let side_total = quota(surviving, config.test_side());
    let side_unanswerable = place
        .iter()
        .filter(|p| matches!(p, Place::ZeroShot | Place::Iid))
        .count();
    let side_answerable = side_total
        .saturating_sub(side_unanswerable)
        .min(answerable.len());
    for (k, &i) in answerable.iter().enumerate() {
        place[i] = if k < side_answerable {
            Place::TestSide
        } else {
            Place::TrainSide
        };
    }

    // final scenarios against the actual training set
    let train: Vec<QuestionRecord> = (0..n)
        .filter(|&i| place[i] == Place::TrainSide)
        .map(|i| questions[i].clone())
        .collect();
    let (train_missing, train_seen) = train_element_sets(&train, degraded_kb);
    let mut records: Vec<QuestionRecord> = questions.to_vec();
    for (i, r) in records.iter_mut().enumerate() {
        r.scenario = match (r.status, place[i]) {
            (Status::Answerable, _) | (_, Place::Removed) => Scenario::NotApplicable,
            _ => classify_scenario(r, &train_missing, &train_seen, degraded_kb)?,
        };
    }

    // 4. carve the test side into test and dev, stratified
    let mut strata: BTreeMap<(Status, Scenario, Option<Cause>), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        if matches!(place[i], Place::ZeroShot | Place::Iid | Place::TestSide) {
            let r = &records[i];
            strata
                .entry((r.status, r.scenario, r.primary_cause()))
                .or_default()
                .push(i);
        }
    }
    let dev_ratio = if config.test_side() > 0.0 {
        config.dev / config.test_side()
    } else {
        0.0
    };
    let mut is_dev = vec![false; n];
    let mut k = 0usize;
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            k += 1;
            is_dev[i] = (k as f64 * dev_ratio).floor() > ((k - 1) as f64 * dev_ratio).floor();
        }
    }

    let mut splits = DatasetSplits {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        zero_shot_elements: zero_shot,
        removed_for_leakage,
        path_leaks: BTreeMap::new(),
        summary: SplitSummary::default(),
    };
    let mut achieved = ScenarioCounts::default();
    for (i, r) in records.into_iter().enumerate() {
        match place[i] {
            Place::Removed => {}
            Place::TrainSide => splits.train.push(r),
            Place::Open => unreachable!("every question is placed"),
            _ => {
                achieved.add(r.scenario);
                if is_dev[i] {
                    splits.dev.push(r);
                } else {
                    splits.test.push(r);
                }
            }
        }
    }
    splits.path_leaks = path_leaks(&splits, ideal_kb)?;
    let total = (splits.train.len() + splits.dev.len() + splits.test.len()).max(1) as f64;
    splits.summary = SplitSummary {
        input_questions: n,
        target_fractions: [config.train, config.test, config.dev],
        achieved_fractions: [
            splits.train.len() as f64 / total,
            splits.test.len() as f64 / total,
            splits.dev.len() as f64 / total,
        ],
        target_unanswerable_test_side: target,
        achieved_unanswerable_test_side: achieved,
        warnings,
    };
    for w in &splits.summary.warnings {
        warn!("{w}");
    }
    Ok(splits)
}

fn path_leaks(
    splits: &DatasetSplits,
    ideal_kb: &KnowledgeBase,
) -> Result<BTreeMap<ElementRef, Vec<String>>, SplitError> {
    let mut out = BTreeMap::new();
    if splits.zero_shot_elements.is_empty() {
        return Ok(out);
    }
    let supports: Vec<(&str, BTreeSet<Fact>)> = splits
        .train
        .iter()
        .map(|q| {
            execute(&q.ideal_lf, ideal_kb)
                .map(|e| (q.qid.as_str(), e.support()))
                .map_err(|e| SplitError::Ideal {
                    qid: q.qid.clone(),
                    reason: e.to_string(),
                })
        })
        .collect::<Result<_, _>>()?;
    for g in &splits.zero_shot_elements {
        let tied = |f: &Fact| match g {
            ElementRef::Relation(r) => f.relation == *r,
            ElementRef::Type(t) => {
                let members = ideal_kb.instances_of(t);
                f.entities().any(|e| members.contains(e))
            }
            _ => false,
        };
        let qids: Vec<String> = supports
            .iter()
            .filter(|(_, s)| s.iter().any(tied))
            .map(|(q, _)| q.to_string())
            .collect();
        if !qids.is_empty() {
            out.insert(g.clone(), qids);
        }
    }
    Ok(out)
}

/// Label of an unanswerable question in the statistics tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Label {
    Nk,
    Na,
}

/// Cells of the per-cause table: cause, scenario and label.
pub const CAUSE_CELLS: [(Cause, Scenario, Label); 9] = [
    (Cause::TypeDrop, Scenario::Iid, Label::Nk),
    (Cause::TypeDrop, Scenario::PartialZeroShot, Label::Nk),
    (Cause::TypeDrop, Scenario::FullZeroShot, Label::Nk),
    (Cause::RelationDrop, Scenario::Iid, Label::Nk),
    (Cause::RelationDrop, Scenario::PartialZeroShot, Label::Nk),
    (Cause::RelationDrop, Scenario::FullZeroShot, Label::Nk),
    (Cause::EntityDrop, Scenario::Iid, Label::Na),
    (Cause::EntityDrop, Scenario::Iid, Label::Nk),
    (Cause::FactDrop, Scenario::Iid, Label::Na),
];

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SplitStats {
    pub split: String,
    pub answerable: usize,
    /// Unanswerable with an NK form (answers are NA too).
    pub nk: usize,
    /// Unanswerable with a valid form and NA answers.
    pub na: usize,
    /// Counts in [`CAUSE_CELLS`] order, by primary cause.
    pub cause_cells: Vec<usize>,
    /// Unanswerable questions that fall outside every cell.
    pub off_table: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StatsReport {
    pub splits: Vec<SplitStats>,
}

fn split_stats(name: &str, records: &[QuestionRecord]) -> SplitStats {
    let mut s = SplitStats {
        split: name.to_string(),
        cause_cells: vec![0; CAUSE_CELLS.len()],
        ..Default::default()
    };
    for r in records {
        if r.status == Status::Answerable {
            s.answerable += 1;
            continue;
        }
        let label = if r.current_lf.is_nk() {
            Label::Nk
        } else {
            Label::Na
        };
        match label {
            Label::Nk => s.nk += 1,
            Label::Na => s.na += 1,
        }
        let cell = CAUSE_CELLS
            .iter()
            .position(|&(c, sc, l)| Some(c) == r.primary_cause() && sc == r.scenario && l == label);
        match cell {
            Some(k) => s.cause_cells[k] += 1,
            None => s.off_table += 1,
        }
    }
    s
}

pub fn stats(splits: &DatasetSplits) -> StatsReport {
    StatsReport {
        splits: vec![
            split_stats("train", &splits.train),
            split_stats("dev", &splits.dev),
            split_stats("test", &splits.test),
        ],
    }
}

impl StatsReport {
    /// Aligned plain-text rendering: split sizes, then per-cause cells.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<6} {:>8} {:>8} {:>8}", "split", "A", "U:NK", "U:NA");
        for s in &self.splits {
            let _ = writeln!(
                out,
                "{:<6} {:>8} {:>8} {:>8}",
                s.split, s.answerable, s.nk, s.na
            );
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<6} | {:^26} | {:^26} | {:^17} | {:^8}",
            "", "type drop", "relation drop", "entity drop", "fact drop"
        );
        let _ = writeln!(
            out,
            "{:<6} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>8} {:>8} | {:>8}",
            "", "iid", "partial", "full", "iid", "partial", "full", "iid", "iid", "iid"
        );
        let _ = writeln!(
            out,
            "{:<6} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>8} {:>8} | {:>8}",
            "split", "NK", "NK", "NK", "NK", "NK", "NK", "NA", "NK", "NA"
        );
        for s in &self.splits {
            let c = &s.cause_cells;
            let _ = writeln!(
                out,
                "{:<6} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>8} {:>8} | {:>8}",
                s.split, c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8]
            );
        }
        let off: usize = self.splits.iter().map(|s| s.off_table).sum();
        if off > 0 {
            let _ = writeln!(out, "off-table unanswerable questions: {off}");
        }
        out
    }
}

#[cfg(test)]
mod tests;

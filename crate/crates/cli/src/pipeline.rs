//! Forge, split, stats, exec, eval and validate, as functions from input
//! texts to output files. The binary adds argument parsing and disk I/O.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kbqa_answerability::dataset::{Cause, QuestionRecord, Scenario, Status};
use kbqa_answerability::degrader::{replay, run_degrade, DegradeState};
use kbqa_answerability::evaluator::{evaluate, tune_thresholds, EvalReport, Objective, Prediction, Thresholds};
use kbqa_answerability::kb::{load_kb, render_facts, render_schema, ElementKind, KnowledgeBase};
use kbqa_answerability::sexpr::{execute, parse, ExecError};
use kbqa_answerability::splitter::{build_splits, classify_scenario, stats, train_element_sets, DatasetSplits, StatsReport};
use serde::Serialize;
use thiserror::Error;

use crate::config::{derive_seed, PipelineConfig};
use crate::formats::{
    parse_dataset, parse_drop_log, parse_predictions, read_text, render_dataset, render_drop_log,
    FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("targets not met under --strict:\n  {}", .0.join("\n  "))]
    Infeasible(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

pub fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Output file name and contents.
pub type OutFile = (&'static str, String);

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KbSizes {
    pub types: usize,
    pub relations: usize,
    pub entities: usize,
    pub facts: usize,
}

impl KbSizes {
    pub fn of(kb: &KnowledgeBase) -> Self {
        KbSizes {
            types: kb.types().len(),
            relations: kb.relations().len(),
            entities: kb.entities().len(),
            facts: kb.facts().len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauseSummary {
    pub cause: Cause,
    pub target_fraction: f64,
    pub target: usize,
    pub achieved: usize,
    pub achieved_fraction: f64,
    pub steps: usize,
    pub exhausted: bool,
    pub hit_max_steps: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForgeSummary {
    pub format_version: u32,
    pub seed: u64,
    pub degrade_seed: u64,
    pub questions: usize,
    pub target_unanswerable_fraction: f64,
    pub unanswerable: usize,
    pub achieved_unanswerable_fraction: f64,
    pub per_cause: Vec<CauseSummary>,
    pub ideal_kb: KbSizes,
    pub degraded_kb: KbSizes,
    pub revived: Vec<String>,
    /// Targets missed by more than the tolerance, or phases that ran out of
    /// candidates.
    pub warnings: Vec<String>,
}

pub struct Forged {
    pub state: DegradeState,
    pub summary: ForgeSummary,
    pub files: Vec<OutFile>,
}

fn frac(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

/// Degrades the knowledge base and relabels the questions.
pub fn forge(ideal_kb: KnowledgeBase, questions: Vec<QuestionRecord>, cfg: &PipelineConfig) -> Result<Forged, CliError> {
    let dcfg = cfg.degrade_config().map_err(CliError::Usage)?;
    let ideal_sizes = KbSizes::of(&ideal_kb);
    let ideal_schema = render_schema(&ideal_kb);
    let ideal_facts = render_facts(&ideal_kb);
    let n = questions.len();
    let state = run_degrade(questions, ideal_kb, &dcfg).map_err(data_err)?;

    let tol = cfg.report.tolerance;
    let mut warnings = Vec::new();
    let mut per_cause = Vec::new();
    for p in state.phases() {
        let target_fraction = dcfg.fraction(p.cause);
        let achieved_fraction = frac(p.achieved, n);
        if p.exhausted || p.hit_max_steps {
            warnings.push(format!(
                "{}: stopped at {}/{} questions ({})",
                p.cause,
                p.achieved,
                p.target,
                if p.exhausted { "no candidates left" } else { "step limit" }
            ));
        }
        if (achieved_fraction - target_fraction).abs() > tol + 1e-12 {
            warnings.push(format!(
                "{}: achieved {:.4} vs target {:.4} (tolerance {tol})",
                p.cause, achieved_fraction, target_fraction
            ));
        }
        per_cause.push(CauseSummary {
            cause: p.cause,
            target_fraction,
            target: p.target,
            achieved: p.achieved,
            achieved_fraction,
            steps: p.steps,
            exhausted: p.exhausted,
            hit_max_steps: p.hit_max_steps,
        });
    }
    let unanswerable = state.unanswerable_count();
    let achieved = frac(unanswerable, n);
    if (achieved - dcfg.target_unanswerable_fraction).abs() > tol + 1e-12 {
        warnings.push(format!(
            "overall: achieved {achieved:.4} vs target {:.4} (tolerance {tol})",
            dcfg.target_unanswerable_fraction
        ));
    }
    let revived = state.drop_log().iter().flat_map(|e| e.revived.iter().cloned()).collect();
    let summary = ForgeSummary {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        degrade_seed: dcfg.seed,
        questions: n,
        target_unanswerable_fraction: dcfg.target_unanswerable_fraction,
        unanswerable,
        achieved_unanswerable_fraction: achieved,
        per_cause,
        ideal_kb: ideal_sizes,
        degraded_kb: KbSizes::of(state.kb()),
        revived,
        warnings,
    };
    let files = vec![
        ("ideal_schema.txt", ideal_schema),
        ("ideal_facts.tsv", ideal_facts),
        ("degraded_schema.txt", render_schema(state.kb())),
        ("degraded_facts.tsv", render_facts(state.kb())),
        ("dataset.jsonl", render_dataset(state.questions())),
        ("drop_log.jsonl", render_drop_log(state.drop_log())),
        ("forge_summary.json", to_json(&summary)),
    ];
    Ok(Forged { state, summary, files })
}

/// Forge outputs read back from a directory.
pub struct ForgeDir {
    pub ideal_kb: KnowledgeBase,
    pub degraded_kb: KnowledgeBase,
    pub dataset: Vec<QuestionRecord>,
    pub seed: Option<u64>,
}

pub fn read_kb(schema: &Path, facts: &Path) -> Result<KnowledgeBase, CliError> {
    let s = read_text(schema).map_err(data_err)?;
    let f = read_text(facts).map_err(data_err)?;
    load_kb(&s, &f).map_err(|e| CliError::Data(format!("{} / {}: {e}", schema.display(), facts.display())))
}

pub fn read_dataset(path: &Path) -> Result<Vec<QuestionRecord>, CliError> {
    let text = read_text(path).map_err(data_err)?;
    parse_dataset(&text, &path.display().to_string()).map_err(data_err)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, CliError> {
    let text = read_text(path).map_err(data_err)?;
    parse_predictions(&text, &path.display().to_string()).map_err(data_err)
}

pub fn read_forge_dir(dir: &Path) -> Result<ForgeDir, CliError> {
    let ideal_kb = read_kb(&dir.join("ideal_schema.txt"), &dir.join("ideal_facts.tsv"))?;
    let degraded_kb = read_kb(&dir.join("degraded_schema.txt"), &dir.join("degraded_facts.tsv"))?;
    let dataset = read_dataset(&dir.join("dataset.jsonl"))?;
    let summary_path = dir.join("forge_summary.json");
    let seed = match std::fs::read_to_string(&summary_path) {
        Ok(text) => {
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", summary_path.display())))?;
            v.get("seed").and_then(serde_json::Value::as_u64)
        }
        Err(_) => None,
    };
    Ok(ForgeDir { ideal_kb, degraded_kb, dataset, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElementEntry {
    pub kind: ElementKind,
    pub id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathLeak {
    pub kind: ElementKind,
    pub id: String,
    pub qids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitManifest {
    pub format_version: u32,
    pub seed: u64,
    pub split_seed: u64,
    pub config: kbqa_answerability::splitter::SplitConfig,
    pub sizes: BTreeMap<String, usize>,
    pub summary: kbqa_answerability::splitter::SplitSummary,
    pub zero_shot_elements: Vec<ElementEntry>,
    pub removed_for_leakage: Vec<String>,
    pub path_leaks: Vec<PathLeak>,
    pub warnings: Vec<String>,
}

pub struct SplitOutcome {
    pub splits: DatasetSplits,
    pub manifest: SplitManifest,
    pub stats: StatsReport,
    pub files: Vec<OutFile>,
}

/// Share of each scenario among test-side (dev + test) unanswerable rows.
pub fn test_side_mix(splits: &DatasetSplits) -> [f64; 3] {
    let mut counts = [0usize; 3];
    for r in splits.dev.iter().chain(&splits.test) {
        match r.scenario {
            Scenario::Iid => counts[0] += 1,
            Scenario::PartialZeroShot => counts[1] += 1,
            Scenario::FullZeroShot => counts[2] += 1,
            Scenario::NotApplicable => {}
        }
    }
    let total: usize = counts.iter().sum();
    counts.map(|c| frac(c, total))
}

/// Builds the splits. `mix_tolerance` bounds the test-side scenario mix.
pub fn split(forged: ForgeDir, cfg: &PipelineConfig, mix_tolerance: f64) -> Result<SplitOutcome, CliError> {
    let scfg = cfg.split_config().map_err(CliError::Usage)?;
    let splits = build_splits(&forged.dataset, &forged.degraded_kb, &forged.ideal_kb, &scfg).map_err(data_err)?;
    let report = stats(&splits);
    let mut warnings = splits.summary.warnings.clone();
    let tol = cfg.report.tolerance;
    let names = ["train", "test", "dev"];
    for (i, name) in names.iter().enumerate() {
        let (t, a) = (splits.summary.target_fractions[i], splits.summary.achieved_fractions[i]);
        if (t - a).abs() > tol + 1e-12 {
            warnings.push(format!("{name}: size fraction {a:.4} vs target {t:.4} (tolerance {tol})"));
        }
    }
    let mix = test_side_mix(&splits);
    let target_mix = [scfg.iid, scfg.partial_zero_shot, scfg.full_zero_shot];
    for (k, name) in ["iid", "partial_zero_shot", "full_zero_shot"].iter().enumerate() {
        if (mix[k] - target_mix[k]).abs() > mix_tolerance + 1e-12 {
            warnings.push(format!(
                "{name}: test-side share {:.4} vs target {:.4} (tolerance {mix_tolerance})",
                mix[k], target_mix[k]
            ));
        }
    }
    let manifest = SplitManifest {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        split_seed: scfg.seed,
        config: scfg.clone(),
        sizes: [("train", splits.train.len()), ("dev", splits.dev.len()), ("test", splits.test.len())]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        summary: splits.summary.clone(),
        zero_shot_elements: splits
            .zero_shot_elements
            .iter()
            .map(|g| ElementEntry { kind: g.kind(), id: g.id() })
            .collect(),
        removed_for_leakage: splits.removed_for_leakage.clone(),
        path_leaks: splits
            .path_leaks
            .iter()
            .map(|(g, qids)| PathLeak { kind: g.kind(), id: g.id(), qids: qids.clone() })
            .collect(),
        warnings,
    };
    let files = vec![
        ("train.jsonl", render_dataset(&splits.train)),
        ("dev.jsonl", render_dataset(&splits.dev)),
        ("test.jsonl", render_dataset(&splits.test)),
        ("manifest.json", to_json(&manifest)),
        ("stats.txt", report.render()),
        ("stats.json", to_json(&report)),
    ];
    Ok(SplitOutcome { splits, manifest, stats: report, files })
}

/// Statistics recomputed from split files.
pub fn stats_of(train: Vec<QuestionRecord>, dev: Vec<QuestionRecord>, test: Vec<QuestionRecord>) -> StatsReport {
    let splits = DatasetSplits {
        train,
        dev,
        test,
        zero_shot_elements: Default::default(),
        removed_for_leakage: Vec::new(),
        path_leaks: Default::default(),
        summary: Default::default(),
    };
    stats(&splits)
}

/// Runs one expression and renders answers with their support facts.
///
/// Returns `Err` for syntax errors and forms citing missing elements.
pub fn exec_text(kb: &KnowledgeBase, sexpr: &str) -> Result<String, CliError> {
    let lf = parse(sexpr).map_err(|e| CliError::Data(format!("parse error: {e}")))?;
    let exec = execute(&lf, kb).map_err(|e| match e {
        ExecError::Invalid(missing) => CliError::Data(format!(
            "NK: the form cites elements missing from the knowledge base: {}",
            missing.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        )),
        other => CliError::Data(other.to_string()),
    })?;
    let mut out = String::new();
    let _ = writeln!(out, "form: {lf}");
    if let Some(c) = exec.count {
        let _ = writeln!(out, "count: {c}");
    }
    if exec.is_empty() {
        let _ = writeln!(out, "answers: NA");
        let _ = writeln!(out, "paths:");
        return Ok(out);
    }
    let _ = writeln!(out, "answers: {}", exec.answers.len());
    let _ = writeln!(out, "paths:");
    for (answer, facts) in &exec.paths {
        let _ = writeln!(out, "{answer}");
        for f in facts {
            let _ = writeln!(out, "  {}\t{}\t{}", f.subject, f.relation, f.object);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalOutput {
    pub format_version: u32,
    pub objective: Option<Objective>,
    pub tuned: bool,
    /// Entity and logical-form thresholds; null means none.
    pub thresholds: [Option<f64>; 2],
    pub report: EvalReport,
}

pub struct EvalRequest<'a> {
    pub gold: &'a [QuestionRecord],
    pub predictions: &'a [Prediction],
    pub tune_on: Option<(&'a [QuestionRecord], &'a [Prediction])>,
    pub objective: Objective,
    pub thresholds: Option<Thresholds>,
}

pub fn eval(req: &EvalRequest<'_>) -> Result<(EvalOutput, Vec<OutFile>), CliError> {
    let (thresholds, tuned) = match (req.tune_on, req.thresholds) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("give either explicit thresholds or a tuning set, not both".into()))
        }
        (Some((dev_gold, dev_preds)), None) => {
            (Some(tune_thresholds(dev_preds, dev_gold, req.objective).map_err(data_err)?), true)
        }
        (None, t) => (t, false),
    };
    let report = evaluate(req.predictions, req.gold, thresholds.as_ref()).map_err(data_err)?;
    let opt = |x: f64| x.is_finite().then_some(x);
    let out = EvalOutput {
        format_version: FORMAT_VERSION,
        objective: tuned.then_some(req.objective),
        tuned,
        thresholds: thresholds.map_or([None, None], |t| [opt(t.entity), opt(t.lf)]),
        report,
    };
    let mut text = out.report.render();
    if tuned {
        let _ = writeln!(text, "tuned on dev for {:?}", req.objective);
    }
    let files = vec![("eval.txt", text), ("eval.json", to_json(&out))];
    Ok((out, files))
}

/// Checks a forge directory: labels against re-execution on the degraded
/// knowledge base, and drop-log replay against the stored degraded state.
pub fn validate_forge_dir(dir: &Path) -> Result<Vec<String>, CliError> {
    let forged = read_forge_dir(dir)?;
    let mut problems = Vec::new();
    for r in &forged.dataset {
        problems.extend(label_disagreement(r, &forged.degraded_kb).map(|p| format!("{}: {p}", r.qid)));
    }
    let log_path = dir.join("drop_log.jsonl");
    let log_text = read_text(&log_path).map_err(data_err)?;
    let drops = parse_drop_log(&log_text, &log_path.display().to_string()).map_err(data_err)?;
    let fresh: Vec<QuestionRecord> = forged
        .dataset
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.reset();
            r
        })
        .collect();
    let replayed = replay(fresh, forged.ideal_kb.clone(), drops.iter().map(|(g, c)| (g, *c))).map_err(data_err)?;
    if *replayed.kb() != forged.degraded_kb {
        problems.push("drop-log replay does not reproduce the degraded knowledge base".into());
    }
    for (a, b) in replayed.questions().iter().zip(&forged.dataset) {
        let mut b = b.clone();
        b.scenario = Scenario::NotApplicable;
        if *a != b {
            problems.push(format!("{}: drop-log replay gives different labels", a.qid));
        }
    }
    Ok(problems)
}

/// Disagreement between a record's stored labels and re-execution on `kb`.
pub fn label_disagreement(r: &QuestionRecord, kb: &KnowledgeBase) -> Option<String> {
    let valid = r.ideal_lf.validate(kb).valid;
    let answers = if valid { execute(&r.ideal_lf, kb).ok().map(|e| e.answers) } else { None };
    let expected_status = match &answers {
        Some(a) if !a.is_empty() => Status::Answerable,
        _ => Status::Unanswerable,
    };
    if r.status != expected_status {
        return Some(format!("status {:?}, re-execution says {:?}", r.status, expected_status));
    }
    if r.current_lf.is_nk() == valid {
        return Some(format!("NK label {} but the form is {}", r.current_lf.is_nk(), if valid { "valid" } else { "invalid" }));
    }
    match (&answers, r.current_answers.set()) {
        (Some(a), Some(s)) if !a.is_empty() && a != s => Some("stored answers differ from re-execution".into()),
        _ => None,
    }
}

/// Re-derives every dev/test scenario tag against the train split.
pub fn scenario_disagreements(splits: &DatasetSplits, degraded_kb: &KnowledgeBase) -> Vec<String> {
    let (missing, seen) = train_element_sets(&splits.train, degraded_kb);
    let mut out = Vec::new();
    for r in splits.dev.iter().chain(&splits.test).chain(splits.train.iter()) {
        let expected = if r.is_answerable() {
            Scenario::NotApplicable
        } else {
            match classify_scenario(r, &missing, &seen, degraded_kb) {
                Ok(s) => s,
                Err(e) => {
                    out.push(format!("{}: {e}", r.qid));
                    continue;
                }
            }
        };
        if expected != r.scenario {
            out.push(format!("{}: stored {} but re-derived {}", r.qid, r.scenario, expected));
        }
    }
    out
}

/// Seed used by make-preds when none is given.
pub fn prediction_seed(global: u64) -> u64 {
    derive_seed(global, "make-preds")
}

/// Writes files into `out` all at once: they are staged in a temporary
/// directory inside `out` and moved into place only when every write worked.
pub fn write_outputs<N: AsRef<str>>(out: &Path, files: &[(N, String)]) -> Result<Vec<PathBuf>, CliError> {
    let created = !out.exists();
    std::fs::create_dir_all(out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    let result = (|| -> std::io::Result<Vec<PathBuf>> {
        let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(out)?;
        for (name, content) in files {
            std::fs::write(staging.path().join(name.as_ref()), content)?;
        }
        let mut written = Vec::new();
        for (name, _) in files {
            let dest = out.join(name.as_ref());
            std::fs::rename(staging.path().join(name.as_ref()), &dest)?;
            written.push(dest);
        }
        Ok(written)
    })();
    match result {
        Ok(w) => Ok(w),
        Err(e) => {
            if created {
                let _ = std::fs::remove_dir_all(out);
            }
            Err(CliError::Usage(format!("{}: {e}", out.display())))
        }
    }
}

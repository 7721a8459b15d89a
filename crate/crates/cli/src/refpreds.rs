//! Reference prediction files for exercising the evaluator.

use std::collections::BTreeSet;

use kbqa_answerability::dataset::{AnswerLabel, LfLabel, QuestionRecord};
use kbqa_answerability::evaluator::{PredictedLf, Prediction};
use kbqa_answerability::sexpr::{Answer, Expr, LogicalForm};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferencePredictionSpec {
    GoldCopy,
    AllRefuse,
    /// Corrupts `round(error_rate * n)` seeded rows.
    NoisyOracle { error_rate: f64 },
}

impl ReferencePredictionSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ReferencePredictionSpec::NoisyOracle { error_rate } if !(0.0..=1.0).contains(error_rate) => {
                Err(format!("error rate {error_rate} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

/// A different, still well-formed logical form.
pub fn perturb_lf(lf: &LogicalForm) -> LogicalForm {
    match lf.root() {
        Expr::Count(inner) => LogicalForm::new((**inner).clone()),
        root => LogicalForm::new(Expr::Count(Box::new(root.clone()))),
    }
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

fn corrupt(gold: &QuestionRecord, decoys: &[Answer], rng: &mut ChaCha8Rng) -> (PredictedLf, AnswerLabel) {
    let lf = match &gold.current_lf {
        // a model that misses the knowledge gap predicts the ideal form
        LfLabel::Nk => gold.ideal_lf.to_string(),
        LfLabel::Form(lf) => perturb_lf(lf).to_string(),
    };
    let answers = match &gold.current_answers {
        AnswerLabel::Na => gold.ideal_answers.clone(),
        AnswerLabel::Set(set) => {
            let mut out: BTreeSet<Answer> = set.clone();
            if let Some(victim) = set.iter().choose(rng) {
                out.remove(victim);
            }
            if let Some(d) = decoys.iter().filter(|d| !set.contains(d)).choose(rng) {
                out.insert(d.clone());
            }
            out
        }
    };
    (PredictedLf::Form(lf), AnswerLabel::Set(answers))
}

/// Builds predictions for every gold record, in gold order.
///
/// NoisyOracle rows that are not corrupted copy the gold labels. Corrupted
/// rows get a perturbed form and a swapped answer; an NK gold row gets its
/// ideal form and answers, the typical mistake of a model that ignores the
/// missing knowledge. Scores are drawn lower for corrupted rows, with some
/// overlap.
pub fn make_reference_predictions(
    gold: &[QuestionRecord],
    spec: ReferencePredictionSpec,
    seed: u64,
) -> Result<Vec<Prediction>, String> {
    spec.validate()?;
    match spec {
        ReferencePredictionSpec::GoldCopy => Ok(gold.iter().map(Prediction::from_gold).collect()),
        ReferencePredictionSpec::AllRefuse => Ok(gold.iter().map(|g| Prediction::refusal(&g.qid)).collect()),
        ReferencePredictionSpec::NoisyOracle { error_rate } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = (error_rate * gold.len() as f64).round() as usize;
            let mut order: Vec<usize> = (0..gold.len()).collect();
            order.shuffle(&mut rng);
            let corrupted: BTreeSet<usize> = order.into_iter().take(k).collect();
            let decoys: Vec<Answer> = gold
                .iter()
                .flat_map(|g| g.ideal_answers.iter().filter(|a| matches!(a, Answer::Entity(_))).cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut out = Vec::with_capacity(gold.len());
            for (i, g) in gold.iter().enumerate() {
                let mut p = Prediction::from_gold(g);
                if corrupted.contains(&i) {
                    let (lf, answers) = corrupt(g, &decoys, &mut rng);
                    p.predicted_lf = lf;
                    p.predicted_answers = answers;
                    p.entity_score = Some(round4(rng.gen_range(0.05..0.6)));
                    p.lf_score = Some(round4(rng.gen_range(0.0..0.5)));
                } else {
                    p.entity_score = Some(round4(rng.gen_range(0.45..1.0)));
                    p.lf_score = Some(round4(rng.gen_range(0.35..1.0)));
                }
                out.push(p);
            }
            Ok(out)
        }
    }
}

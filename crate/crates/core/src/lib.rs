//! Turn an answerable-only question-answering corpus over a knowledge base
//! into an answerability benchmark, and score predictions against it.
//!
//! The pipeline degrades the knowledge base by sampled drops of types,
//! relations, entities and facts ([`degrader`]), relabels questions that lose
//! their logical form (`NK`) or their answer (`NA`), carves train/dev/test
//! splits with iid and zero-shot unanswerable questions ([`splitter`]) and
//! evaluates predictions with exact match and regular/lenient answer F1
//! ([`evaluator`]).

pub mod dataset;
pub mod degrader;
pub mod evaluator;
pub mod kb;
pub mod sexpr;
pub mod splitter;
pub mod synth;
pub mod toy;

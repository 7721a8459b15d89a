use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kbqa_answerability::evaluator::{Objective, Thresholds};
use kbqa_bench::config::PipelineConfig;
use kbqa_bench::formats::{render_predictions, read_text, parse_drop_log};
use kbqa_bench::pipeline::{self, CliError};
use kbqa_bench::refpreds::{make_reference_predictions, ReferencePredictionSpec};

/// Build answerability benchmarks from a knowledge base and a question corpus,
/// and score predictions against them.
#[derive(Parser)]
#[command(name = "kbqa-bench", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML pipeline config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Treat missed targets as failures (exit code 3).
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade the knowledge base and relabel questions.
    Forge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        facts: Option<PathBuf>,
        /// Question corpus (JSON lines).
        #[arg(long)]
        questions: Option<PathBuf>,
        /// Target unanswerable fraction, shared equally by the four causes.
        #[arg(long)]
        p_u: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Carve train/dev/test splits from forge outputs.
    Split {
        #[command(flatten)]
        common: Common,
        /// Directory written by `forge`.
        #[arg(long)]
        forge_dir: Option<PathBuf>,
        /// Allowed gap on the test-side scenario mix.
        #[arg(long, default_value_t = 0.05)]
        mix_tolerance: f64,
        /// Output directory (default: <forge-dir>/split).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print unanswerable-question statistics for a split directory.
    Stats {
        #[arg(long)]
        split_dir: PathBuf,
        #[arg(long)]
        json: bool,
        /// Also write stats.txt and stats.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute one s-expression and print answers with support facts.
    Exec {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        facts: PathBuf,
        sexpr: String,
    },
    /// Score predictions against gold labels.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Dev gold file used to tune thresholds.
        #[arg(long, requires = "tune_predictions")]
        tune_on: Option<PathBuf>,
        /// Predictions for the dev gold file.
        #[arg(long, requires = "tune_on")]
        tune_predictions: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Em)]
        objective: ObjectiveArg,
        #[arg(long, allow_negative_numbers = true)]
        entity_threshold: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lf_threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write reference predictions for a gold file.
    MakePreds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.2)]
        error_rate: f64,
        /// Output predictions file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check input files, or a forge directory against re-execution and
    /// drop-log replay.
    Validate {
        #[arg(long, requires = "facts")]
        schema: Option<PathBuf>,
        #[arg(long, requires = "schema")]
        facts: Option<PathBuf>,
        #[arg(long)]
        dataset: Vec<PathBuf>,
        #[arg(long)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        forge_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Em,
    F1r,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    GoldCopy,
    AllRefuse,
    NoisyOracle,
}

fn load_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p).map_err(CliError::Usage)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.strict {
        cfg.report.strict = true;
    }
    Ok(cfg)
}

fn required(p: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    p.ok_or_else(|| CliError::Usage(format!("missing {what} (flag or config)")))
}

fn report_warnings(warnings: &[String], strict: bool) -> Result<(), CliError> {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if strict && !warnings.is_empty() {
        return Err(CliError::Infeasible(warnings.to_vec()));
    }
    Ok(())
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Forge { common, schema, facts, questions, p_u, out } => {
            let mut cfg = load_config(&common)?;
            if let Some(p) = p_u {
                cfg.degrade.target_unanswerable_fraction = p;
                cfg.degrade.type_drop = None;
                cfg.degrade.relation_drop = None;
                cfg.degrade.entity_drop = None;
                cfg.degrade.fact_drop = None;
            }
            let schema = required(schema.or(cfg.paths.schema.clone()), "--schema")?;
            let facts = required(facts.or(cfg.paths.facts.clone()), "--facts")?;
            let questions = required(questions.or(cfg.paths.questions.clone()), "--questions")?;
            let out = required(out.or(cfg.paths.out.clone()), "--out")?;
            let kb = pipeline::read_kb(&schema, &facts)?;
            let qs = pipeline::read_dataset(&questions)?;
            let forged = pipeline::forge(kb, qs, &cfg)?;
            report_warnings(&forged.summary.warnings, cfg.report.strict)?;
            let s = &forged.summary;
            println!(
                "unanswerable {}/{} ({:.1}%, target {:.1}%)",
                s.unanswerable,
                s.questions,
                100.0 * s.achieved_unanswerable_fraction,
                100.0 * s.target_unanswerable_fraction
            );
            for c in &s.per_cause {
                println!(
                    "  {:<14} {:>4} ({:.1}%, target {:.1}%)",
                    c.cause.name(),
                    c.achieved,
                    100.0 * c.achieved_fraction,
                    100.0 * c.target_fraction
                );
            }
            print_written(&pipeline::write_outputs(&out, &forged.files)?);
        }
        Command::Split { common, forge_dir, mix_tolerance, out } => {
            let mut cfg = load_config(&common)?;
            let forge_dir = required(forge_dir.or(cfg.paths.out.clone()), "--forge-dir")?;
            let forged = pipeline::read_forge_dir(&forge_dir)?;
            if common.seed.is_none() && common.config.is_none() {
                if let Some(s) = forged.seed {
                    cfg.seed = s;
                }
            }
            let out = out.unwrap_or_else(|| forge_dir.join("split"));
            let outcome = pipeline::split(forged, &cfg, mix_tolerance)?;
            report_warnings(&outcome.manifest.warnings, cfg.report.strict)?;
            print!("{}", outcome.stats.render());
            print_written(&pipeline::write_outputs(&out, &outcome.files)?);
        }
        Command::Stats { split_dir, json, out } => {
            let read = |name: &str| pipeline::read_dataset(&split_dir.join(name));
            let report = pipeline::stats_of(read("train.jsonl")?, read("dev.jsonl")?, read("test.jsonl")?);
            let text = report.render();
            let json_text = pipeline::to_json(&report);
            if json {
                print!("{json_text}");
            } else {
                print!("{text}");
            }
            if let Some(out) = out {
                pipeline::write_outputs(&out, &[("stats.txt", text), ("stats.json", json_text)])?;
            }
        }
        Command::Exec { schema, facts, sexpr } => {
            let kb = pipeline::read_kb(&schema, &facts)?;
            print!("{}", pipeline::exec_text(&kb, &sexpr)?);
        }
        Command::Eval { gold, predictions, tune_on, tune_predictions, objective, entity_threshold, lf_threshold, out } => {
            let gold = pipeline::read_dataset(&gold)?;
            let preds = pipeline::read_predictions(&predictions)?;
            let dev = match (tune_on, tune_predictions) {
                (Some(g), Some(p)) => Some((pipeline::read_dataset(&g)?, pipeline::read_predictions(&p)?)),
                _ => None,
            };
            let thresholds = match (entity_threshold, lf_threshold) {
                (None, None) => None,
                (e, l) => Some(Thresholds {
                    entity: e.unwrap_or(f64::NEG_INFINITY),
                    lf: l.unwrap_or(f64::NEG_INFINITY),
                }),
            };
            let req = pipeline::EvalRequest {
                gold: &gold,
                predictions: &preds,
                tune_on: dev.as_ref().map(|(g, p)| (g.as_slice(), p.as_slice())),
                objective: match objective {
                    ObjectiveArg::Em => Objective::Em,
                    ObjectiveArg::F1r => Objective::F1Regular,
                },
                thresholds,
            };
            let (_, files) = pipeline::eval(&req)?;
            print!("{}", files[0].1);
            if let Some(out) = out {
                print_written(&pipeline::write_outputs(&out, &files)?);
            }
        }
        Command::MakePreds { common, gold, mode, error_rate, out } => {
            let cfg = load_config(&common)?;
            let gold = pipeline::read_dataset(&gold)?;
            let spec = match mode {
                ModeArg::GoldCopy => ReferencePredictionSpec::GoldCopy,
                ModeArg::AllRefuse => ReferencePredictionSpec::AllRefuse,
                ModeArg::NoisyOracle => ReferencePredictionSpec::NoisyOracle { error_rate },
            };
            let preds = make_reference_predictions(&gold, spec, pipeline::prediction_seed(cfg.seed))
                .map_err(CliError::Usage)?;
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = out
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| CliError::Usage(format!("bad output path {}", out.display())))?;
            print_written(&pipeline::write_outputs(dir, &[(name, render_predictions(&preds))])?);
        }
        Command::Validate { schema, facts, dataset, predictions, forge_dir } => {
            let mut problems = Vec::new();
            if let (Some(s), Some(f)) = (schema, facts) {
                let kb = pipeline::read_kb(&s, &f)?;
                let issues = kb.check_invariants();
                problems.extend(issues.iter().map(ToString::to_string));
                println!("knowledge base: {:?}", pipeline::KbSizes::of(&kb));
            }
            for d in &dataset {
                let rows = pipeline::read_dataset(d)?;
                println!("{}: {} records", d.display(), rows.len());
            }
            for p in &predictions {
                let rows = pipeline::read_predictions(p)?;
                println!("{}: {} predictions", p.display(), rows.len());
            }
            if let Some(dir) = forge_dir {
                let log = dir.join("drop_log.jsonl");
                let n = parse_drop_log(&read_text(&log).map_err(pipeline::data_err)?, &log.display().to_string())
                    .map_err(pipeline::data_err)?
                    .len();
                problems.extend(pipeline::validate_forge_dir(&dir)?);
                println!("{}: {n} drops replayed", dir.display());
            }
            if !problems.is_empty() {
                for p in &problems {
                    eprintln!("{p}");
                }
                return Err(CliError::Data(format!("{} problem(s)", problems.len())));
            }
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

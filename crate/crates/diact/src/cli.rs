//! The `diact` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
//! failure. All randomness sits behind explicit `--seed` flags or spec
//! fields; the `DIACT_SEED` environment variable overrides seeds that were
//! not given on the command line.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::corpus::{
    corpus_stats, generate_synthetic, load_corpus, save_corpus, validate, CorpusFormat,
    CorpusStats, Level, SynthConfig,
};
use crate::harness::{
    compare, run_experiment, ExperimentMode, ExperimentReport, ExperimentSpec, HarnessError,
    PipelineSpec,
};
use crate::models::{
    gradcheck_fixture, train, ClassifierGradCheck, ContextConfig,
    EncoderConfig, LevelClassifier, ModelError,
};
use crate::neural::{gradient_check_report, RandomSource};
use crate::text::{build_vocab, load_pretrained_embeddings, random_embeddings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser)]
#[command(
    name = "diact",
    version,
    about = "Train, evaluate, and hierarchically compose dialog-act classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted lexical triggers.
    GenSynth {
        /// Generator configuration (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output corpus path (JSON format).
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-level, per-speaker label distribution tables.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: CorpusFormat,
    },
    /// Train the classifiers described by a spec on the full corpus and
    /// write checkpoints.
    Train {
        #[arg(long)]
        spec: PathBuf,
        /// Directory for checkpoints and training histories.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full cross-validation x runs protocol and write reports.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        /// Directory for <spec-hash>.report.json and .txt.
        #[arg(long, default_value = "reports")]
        report: PathBuf,
        /// Worker threads for independent (run x fold) cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate the hierarchical pipeline (spec mode must be hierarchical).
    HierEval {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "reports")]
        report: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write run-0 per-segment predictions as JSON lines.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Evaluate the combined single-label baseline (spec mode must be
    /// combined).
    ComboEval {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "reports")]
        report: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Binomial significance test between two report files.
    Compare {
        #[arg(long)]
        report_a: PathBuf,
        #[arg(long)]
        report_b: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Configuration label inside report A (defaults to the first).
        #[arg(long)]
        config_a: Option<String>,
        #[arg(long)]
        config_b: Option<String>,
    },
    /// Finite-difference verification of every assembled architecture.
    Gradcheck {
        /// Optional JSON with fields epsilon, coords, seed.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var("DIACT_SEED").ok()?.parse().ok()
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(env_seed).unwrap_or(0)
}

#[derive(Debug)]
struct CliFailure {
    code: i32,
    message: String,
}

impl CliFailure {
    fn data(message: impl Into<String>) -> CliFailure {
        CliFailure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> CliFailure {
        CliFailure {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

fn harness_failure(err: HarnessError) -> CliFailure {
    match &err {
        HarnessError::Spec(_)
        | HarnessError::Corpus(_)
        | HarnessError::Json(_)
        | HarnessError::Io { .. }
        | HarnessError::MismatchedSegments(..) => CliFailure::data(err.to_string()),
        _ => CliFailure::runtime(err.to_string()),
    }
}

fn model_failure(err: ModelError) -> CliFailure {
    match &err {
        ModelError::BadConfig(_) | ModelError::BadCheckpoint(_) => CliFailure::data(err.to_string()),
        _ => CliFailure::runtime(err.to_string()),
    }
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliFailure> {
    match command {
        Command::GenSynth { config, seed, out } => cmd_gen_synth(config, seed, out),
        Command::Stats { corpus, format } => cmd_stats(&corpus, format),
        Command::Train { spec, out } => cmd_train(&spec, &out),
        Command::Eval { spec, report, jobs } => cmd_eval(&spec, &report, jobs, None),
        Command::HierEval {
            spec,
            report,
            jobs,
            predictions,
        } => cmd_hier_eval(&spec, &report, jobs, predictions),
        Command::ComboEval { spec, report, jobs } => cmd_combo_eval(&spec, &report, jobs),
        Command::Compare {
            report_a,
            report_b,
            seed,
            config_a,
            config_b,
        } => cmd_compare(&report_a, &report_b, seed, config_a, config_b),
        Command::Gradcheck { config } => cmd_gradcheck(config),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliFailure> {
    let content = fs::read_to_string(path)
        .map_err(|e| CliFailure::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&content)
        .map_err(|e| CliFailure::data(format!("cannot parse {}: {e}", path.display())))
}

fn cmd_gen_synth(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
) -> Result<(), CliFailure> {
    let config: SynthConfig = match config {
        Some(path) => read_json(&path)?,
        None => SynthConfig::default(),
    };
    let seed = resolve_seed(seed);
    let corpus = generate_synthetic(&config, seed).map_err(|e| CliFailure::data(e.to_string()))?;
    let violations = validate(&corpus);
    if !violations.is_empty() {
        return Err(CliFailure::runtime(format!(
            "generated corpus failed validation: {} violation(s)",
            violations.len()
        )));
    }
    save_corpus(&corpus, &out, CorpusFormat::Json).map_err(|e| CliFailure::runtime(e.to_string()))?;
    let stats = corpus_stats(&corpus);
    println!(
        "wrote {} ({} dialogs, {} segments: {} user / {} system, seed {})",
        out.display(),
        stats.dialogs,
        stats.total_segments,
        stats.user_segments,
        stats.system_segments,
        seed,
    );
    Ok(())
}

fn print_level_table(title: &str, rows: &[crate::corpus::LabelCount]) {
    println!("\n{title:<18} {:>7} {:>7} {:>7} {:>6}", "User", "System", "Total", "%");
    for row in rows {
        println!(
            "{:<18} {:>7} {:>7} {:>7} {:>6.1}",
            row.label, row.user, row.system, row.total, row.percent
        );
    }
}

fn print_stats(stats: &CorpusStats) {
    println!(
        "corpus: {} dialogs, {} segments ({} user, {} system)",
        stats.dialogs, stats.total_segments, stats.user_segments, stats.system_segments
    );
    print_level_table("Level 1", &stats.l1);
    print_level_table("Level 2", &stats.l2);
    print_level_table("Level 3", &stats.l3);
}

fn cmd_stats(path: &Path, format: CorpusFormat) -> Result<(), CliFailure> {
    let corpus = load_corpus(path, format).map_err(|e| CliFailure::data(e.to_string()))?;
    print_stats(&corpus_stats(&corpus));
    Ok(())
}

/// Trains one model per spec configuration on the full corpus (minus the
/// seeded validation split) and writes checkpoints plus histories.
fn cmd_train(spec_path: &Path, out: &Path) -> Result<(), CliFailure> {
    let spec = ExperimentSpec::load(spec_path).map_err(harness_failure)?;
    let corpus = spec.load_corpus().map_err(harness_failure)?;
    let vocab = build_vocab(&corpus, spec.min_count);
    fs::create_dir_all(out)
        .map_err(|e| CliFailure::runtime(format!("cannot create {}: {e}", out.display())))?;
    let embedding_seed = spec
        .embedding
        .seed
        .unwrap_or(RandomSource::new(spec.effective_base_seed()).derive(0xE3B).seed());
    let ids = {
        let mut ids = corpus.dialog_ids();
        ids.sort_unstable();
        ids
    };
    let (train_ids, val_ids) =
        crate::corpus::split_train_val(&ids, spec.training.val_fraction, spec.effective_base_seed())
            .map_err(|e| CliFailure::data(e.to_string()))?;

    let jobs: Vec<(String, Level, crate::models::ClassifierConfig)> = match spec.mode {
        ExperimentMode::L1 | ExperimentMode::L2 | ExperimentMode::L3 => {
            let level = spec.mode.level().expect("level mode");
            spec.configs
                .iter()
                .map(|c| (c.label.clone(), level, c.config.clone()))
                .collect()
        }
        ExperimentMode::Hierarchical => {
            let p = spec.pipeline.clone().unwrap_or_else(PipelineSpec::best_reported);
            vec![
                ("l1".into(), Level::L1, p.l1),
                ("l2".into(), Level::L2, p.l2),
                ("l3".into(), Level::L3, p.l3),
            ]
        }
        ExperimentMode::Combined => {
            return cmd_train_combined(&spec, &corpus, vocab, out, &train_ids, &val_ids);
        }
    };

    for (label, level, config) in jobs {
        let embeddings = match &spec.embedding.pretrained {
            Some(path) => load_pretrained_embeddings(path, &vocab, config.embedding_dim, embedding_seed)
                .map_err(|e| CliFailure::data(e.to_string()))?,
            None => random_embeddings(&vocab, config.embedding_dim, embedding_seed),
        };
        let mut rng = RandomSource::new(spec.effective_base_seed()).derive(0x696e_6974); // "init"
        let mut classifier =
            LevelClassifier::init(level, config, vocab.clone(), embeddings, &mut rng)
                .map_err(model_failure)?;
        let train_samples = classifier.samples(&corpus, &train_ids).map_err(model_failure)?;
        let val_samples = classifier.samples(&corpus, &val_ids).map_err(model_failure)?;
        let history = train(
            &mut classifier.net,
            &train_samples,
            &val_samples,
            &spec.training,
            spec.effective_base_seed(),
        )
        .map_err(model_failure)?;
        let stem = out.join(&label);
        classifier.save_checkpoint(&stem).map_err(model_failure)?;
        let history_path = out.join(format!("{label}.history.json"));
        fs::write(&history_path, serde_json::to_string_pretty(&history).expect("history"))
            .map_err(|e| CliFailure::runtime(e.to_string()))?;
        println!(
            "trained {label} ({} epochs, best epoch {} at {:.4}); checkpoint {}",
            history.epochs.len(),
            history.best_epoch,
            history.best_val_metric,
            stem.display(),
        );
    }
    Ok(())
}

fn cmd_train_combined(
    spec: &ExperimentSpec,
    corpus: &crate::corpus::Corpus,
    vocab: crate::text::Vocabulary,
    out: &Path,
    train_ids: &[String],
    val_ids: &[String],
) -> Result<(), CliFailure> {
    let config = spec.combined_config();
    let embedding_seed = spec
        .embedding
        .seed
        .unwrap_or(RandomSource::new(spec.effective_base_seed()).derive(0xE3B).seed());
    let embeddings = random_embeddings(&vocab, config.embedding_dim, embedding_seed);
    let (classifier, history) = crate::models::combined_single_label_train(
        corpus,
        train_ids,
        val_ids,
        config,
        &spec.training,
        vocab,
        embeddings,
        spec.effective_base_seed(),
    )
    .map_err(model_failure)?;
    let manifest = serde_json::json!({
        "kind": "combined_classifier",
        "classes": classifier.inventory.len(),
        "config": classifier.config,
    });
    crate::neural::checkpoint::save(&out.join("combined"), manifest, &classifier.net.all_params())
        .map_err(|e| CliFailure::runtime(e.to_string()))?;
    fs::write(
        out.join("combined.history.json"),
        serde_json::to_string_pretty(&history).expect("history"),
    )
    .map_err(|e| CliFailure::runtime(e.to_string()))?;
    println!(
        "trained combined baseline over {} observed label combinations ({} epochs)",
        classifier.inventory.len(),
        history.epochs.len(),
    );
    Ok(())
}

fn run_and_write_report(
    spec: &ExperimentSpec,
    report_dir: &Path,
    jobs: usize,
) -> Result<ExperimentReport, CliFailure> {
    let report = run_experiment(spec, jobs).map_err(harness_failure)?;
    let json_path = report.write(report_dir).map_err(harness_failure)?;
    print!("{}", report.to_text());
    println!("\nreport: {}", json_path.display());
    Ok(report)
}

fn cmd_eval(
    spec_path: &Path,
    report_dir: &Path,
    jobs: usize,
    require_mode: Option<ExperimentMode>,
) -> Result<(), CliFailure> {
    let spec = ExperimentSpec::load(spec_path).map_err(harness_failure)?;
    if let Some(required) = require_mode {
        if spec.mode != required {
            return Err(CliFailure::data(format!(
                "spec mode is {}, this command requires {required}",
                spec.mode
            )));
        }
    }
    run_and_write_report(&spec, report_dir, jobs)?;
    Ok(())
}

fn cmd_hier_eval(
    spec_path: &Path,
    report_dir: &Path,
    jobs: usize,
    predictions: Option<PathBuf>,
) -> Result<(), CliFailure> {
    let spec = ExperimentSpec::load(spec_path).map_err(harness_failure)?;
    if spec.mode != ExperimentMode::Hierarchical {
        return Err(CliFailure::data(format!(
            "spec mode is {}, hier-eval requires hierarchical",
            spec.mode
        )));
    }
    run_and_write_report(&spec, report_dir, jobs)?;
    if let Some(path) = predictions {
        let jsonl = crate::harness::predictions::run0_hierarchical_jsonl(&spec, jobs)
            .map_err(harness_failure)?;
        fs::write(&path, jsonl).map_err(|e| CliFailure::runtime(e.to_string()))?;
        println!("predictions: {}", path.display());
    }
    Ok(())
}

fn cmd_combo_eval(spec_path: &Path, report_dir: &Path, jobs: usize) -> Result<(), CliFailure> {
    cmd_eval(spec_path, report_dir, jobs, Some(ExperimentMode::Combined))
}

fn cmd_compare(
    report_a: &Path,
    report_b: &Path,
    seed: Option<u64>,
    config_a: Option<String>,
    config_b: Option<String>,
) -> Result<(), CliFailure> {
    let a = ExperimentReport::from_json(
        &fs::read_to_string(report_a)
            .map_err(|e| CliFailure::data(format!("cannot read {}: {e}", report_a.display())))?,
    )
    .map_err(harness_failure)?;
    let b = ExperimentReport::from_json(
        &fs::read_to_string(report_b)
            .map_err(|e| CliFailure::data(format!("cannot read {}: {e}", report_b.display())))?,
    )
    .map_err(harness_failure)?;
    let seed = resolve_seed(seed);
    let outcome = compare(&a, &b, config_a.as_deref(), config_b.as_deref(), seed)
        .map_err(harness_failure)?;
    println!(
        "comparing {} (run {}) vs {} (run {}) over {} segments",
        outcome.config_a, outcome.run_a, outcome.config_b, outcome.run_b, outcome.result.n
    );
    println!(
        "correct: {} vs {}",
        outcome.result.successes_a, outcome.result.successes_b
    );
    println!(
        "p = {:.6e} -> {}",
        outcome.result.p_value,
        if outcome.result.significant {
            "significant at 0.05"
        } else {
            "not significant"
        }
    );
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(default)]
struct GradcheckConfig {
    epsilon: f64,
    coords: usize,
    seed: u64,
    tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> GradcheckConfig {
        GradcheckConfig {
            epsilon: 1e-5,
            coords: 250,
            seed: 0,
            tolerance: 1e-4,
        }
    }
}

fn cmd_gradcheck(config: Option<PathBuf>) -> Result<(), CliFailure> {
    let config: GradcheckConfig = match config {
        Some(path) => read_json(&path)?,
        None => GradcheckConfig::default(),
    };
    let encoders = [
        ("rnn", EncoderConfig::rnn(4)),
        ("cnn", EncoderConfig::cnn_wide(4)),
    ];
    let mut failures = 0;
    for (enc_name, encoder) in encoders {
        for level in [Level::L1, Level::L2, Level::L3] {
            for (ctx_name, context) in [
                ("no-context", ContextConfig::none()),
                ("with-context", ContextConfig::best_reported(level)),
            ] {
                let (mut classifier, samples) =
                    gradcheck_fixture(level, encoder.clone(), context, config.seed ^ 0x5eed)
                        .map_err(model_failure)?;
                let mut fixture = ClassifierGradCheck {
                    net: &mut classifier.net,
                    samples,
                };
                let mut rng = RandomSource::new(config.seed);
                let report =
                    gradient_check_report(&mut fixture, config.epsilon, config.coords, &mut rng)
                        .map_err(|e| CliFailure::runtime(e.to_string()))?;
                let ok = report.max_rel_error < config.tolerance;
                if !ok {
                    failures += 1;
                }
                println!(
                    "{:<4} {:<3} {:<13} max rel err {:.3e} over {} coords (worst {}[{}]) {}",
                    enc_name,
                    level,
                    ctx_name,
                    report.max_rel_error,
                    report.coords_checked,
                    report.worst_param,
                    report.worst_coord,
                    if ok { "ok" } else { "FAIL" },
                );
            }
        }
    }
    if failures > 0 {
        return Err(CliFailure::runtime(format!(
            "{failures} architecture(s) exceeded the {:.0e} tolerance",
            config.tolerance
        )));
    }
    Ok(())
}

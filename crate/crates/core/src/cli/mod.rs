//! The `cohortsel` command line: `synth`, `train`, `tune`, `predict` and
//! `evaluate`. Exit status is 0 on success, 1 on usage errors and 2 on
//! data or configuration errors.

mod config;
mod model_file;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

pub use config::PipelineConfig;
pub use model_file::{
    decode_model, encode_model, load_model, save_model, ModelPayload, FORMAT_VERSION,
};

use crate::corpus::{
    generate_synthetic, load_corpus, load_gold, load_ner_annotations, Document, NerSpan,
};
use crate::error::{Error, Result};
use crate::pipeline::{predict_corpus, resolve_spans, train_model};
use crate::tuner_eval::{grid_search_weights, micro_f1};
use crate::util::{to_canonical_json, to_canonical_json_pretty, write_atomic};

pub const THREADS_ENV: &str = "COHORTSEL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "cohortsel",
    version,
    about = "Per-criterion cohort selection from clinical notes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus, entity annotations and gold labels.
    Synth(SynthArgs),
    /// Fit all label ensembles and write a model file.
    Train(DataArgs),
    /// Cross-validate the weight grids; write a CV report and a tuned config.
    Tune(TuneArgs),
    /// Label a corpus with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    docs: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Config whose schema drives generation.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Model output path (overrides `model_out`).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Directory for `cv_report.json` and `tuned_config.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Entity annotations; without them the model's lexicon tags the text.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Predictions output path.
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Directory for `eval_report.json`; defaults to the predictions' directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let rendered = e.render().to_string();
                    let _ = write!(stderr, "{rendered}");
                    if !rendered.contains("Usage:") {
                        let _ = writeln!(stderr, "\n{}", Cli::command().render_usage());
                    }
                    1
                }
            };
        }
    };
    match with_thread_pool(|| execute(cli.command)) {
        Ok(lines) => {
            for l in lines {
                let _ = write!(stdout, "{l}");
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

fn with_thread_pool<T: Send>(f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse::<usize>().map_err(|_| {
            Error::config(THREADS_ENV, format!("`{v}` is not a non-negative integer"))
        })?,
        _ => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(THREADS_ENV, e.to_string()))?;
    pool.install(f)
}

/// Runs a command, returning what it prints on success.
fn execute(command: Command) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    match command {
        Command::Synth(a) => synth(a, &mut lines)?,
        Command::Train(a) => train(a, &mut lines)?,
        Command::Tune(a) => tune(a, &mut lines)?,
        Command::Predict(a) => predict(a, &mut lines)?,
        Command::Evaluate(a) => evaluate(a, &mut lines)?,
    }
    Ok(lines)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn synth(a: SynthArgs, out: &mut Vec<String>) -> Result<()> {
    let schema = match &a.config {
        Some(p) => PipelineConfig::load(p)?.schema,
        None => crate::corpus::LabelSchema::default_schema(),
    };
    let corpus = generate_synthetic(a.seed, a.docs, &schema)?;
    create_dir(&a.out)?;
    write_atomic(
        &a.out.join("corpus.jsonl"),
        corpus.corpus_jsonl().as_bytes(),
    )?;
    write_atomic(
        &a.out.join("annotations.tsv"),
        corpus.annotations_tsv().as_bytes(),
    )?;
    write_atomic(&a.out.join("gold.json"), corpus.gold_json().as_bytes())?;
    out.push(format!(
        "wrote {} documents, {} entity spans to {}\n",
        corpus.documents.len(),
        corpus.annotations.len(),
        a.out.display()
    ));
    Ok(())
}

/// Config from `--config` (or defaults), with command-line overrides.
fn resolve_config(a: &DataArgs) -> Result<PipelineConfig> {
    let mut cfg = match (&a.config, a.seed) {
        (Some(p), _) => PipelineConfig::load(p)?,
        (None, Some(seed)) => PipelineConfig::with_seed(seed),
        (None, None) => return Err(Error::config("seed", "pass --seed or a config with `seed`")),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    for (slot, flag) in [
        (&mut cfg.corpus, &a.corpus),
        (&mut cfg.annotations, &a.annotations),
        (&mut cfg.gold, &a.gold),
        (&mut cfg.model_out, &a.model),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

struct LoadedData {
    docs: Vec<Document>,
    spans: Vec<Vec<NerSpan>>,
    gold: crate::corpus::DecisionMap,
}

fn load_training_data(cfg: &PipelineConfig) -> Result<LoadedData> {
    let docs = load_corpus(cfg.require("corpus", &cfg.corpus)?)?;
    let gold = load_gold(cfg.require("gold", &cfg.gold)?)?;
    let annotations = match &cfg.annotations {
        Some(p) => Some(load_ner_annotations(p, &docs)?),
        None => None,
    };
    let spans = resolve_spans(&docs, annotations.as_ref(), &cfg.fallback_lexicon()?);
    Ok(LoadedData { docs, spans, gold })
}

fn train(a: DataArgs, out: &mut Vec<String>) -> Result<()> {
    let cfg = resolve_config(&a)?;
    let model_path = cfg.require("model_out", &cfg.model_out)?.to_path_buf();
    let data = load_training_data(&cfg)?;
    let trained = train_model(
        &cfg.schema,
        &data.docs,
        &data.spans,
        &data.gold,
        cfg.component_weights,
        &cfg.hyperparameters,
        cfg.seed,
    )?;
    let lexicon = cfg.fallback_lexicon()?;
    // Where the file lands is not part of the model.
    let mut config = cfg;
    config.model_out = None;
    let payload = ModelPayload {
        lexicon,
        config,
        tfidf: trained.tfidf,
        ensemble: trained.ensemble,
    };
    save_model(&model_path, &payload)?;
    out.push(format!(
        "trained {} labels on {} documents; model written to {}\n",
        payload.ensemble.labels.len(),
        data.docs.len(),
        model_path.display()
    ));
    Ok(())
}

fn tune(a: TuneArgs, out: &mut Vec<String>) -> Result<()> {
    let cfg = resolve_config(&a.data)?;
    let data = load_training_data(&cfg)?;
    let result = grid_search_weights(
        &cfg.schema,
        &data.docs,
        &data.spans,
        &data.gold,
        &cfg.grid,
        a.folds,
        cfg.seed,
        &cfg.hyperparameters,
        cfg.component_weights,
    )?;
    let mut tuned = cfg.clone();
    tuned.absolutize_paths()?;
    tuned.component_weights = result.component_weights;
    tuned.schema = result.apply_to(&cfg.schema);
    // Phrases are inline now; file references would be relative to the
    // original config.
    for l in &mut tuned.schema.labels {
        for g in &mut l.gazetteers {
            g.file = None;
        }
    }
    create_dir(&a.out)?;
    write_atomic(
        &a.out.join("cv_report.json"),
        to_canonical_json_pretty(&result.report)?.as_bytes(),
    )?;
    write_atomic(
        &a.out.join("tuned_config.json"),
        to_canonical_json_pretty(&tuned)?.as_bytes(),
    )?;
    let w = result.component_weights;
    out.push(format!(
        "chosen weights lr={} svm={} gbdt={}; cross-validated micro-F1 {:.2}%\n",
        w.lr,
        w.svm,
        w.gbdt,
        100.0 * result.report.cv_eval.micro_f1
    ));
    Ok(())
}

fn predict(a: PredictArgs, out: &mut Vec<String>) -> Result<()> {
    let payload = load_model(&a.model)?;
    let docs = load_corpus(&a.corpus)?;
    let annotations = match &a.annotations {
        Some(p) => Some(load_ner_annotations(p, &docs)?),
        None => None,
    };
    let spans = resolve_spans(&docs, annotations.as_ref(), &payload.lexicon);
    let pred = predict_corpus(&payload.trained(), &docs, &spans)?;
    write_atomic(&a.pred, to_canonical_json(&pred)?.as_bytes())?;
    out.push(format!(
        "labelled {} documents; predictions written to {}\n",
        docs.len(),
        a.pred.display()
    ));
    Ok(())
}

fn evaluate(a: EvaluateArgs, out: &mut Vec<String>) -> Result<()> {
    let gold = load_gold(&a.gold)?;
    let pred = load_gold(&a.pred)?;
    let report = micro_f1(&gold, &pred)?;
    let dir = match &a.out {
        Some(d) => d.clone(),
        None => a.pred.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        create_dir(&dir)?;
    }
    write_atomic(
        &dir.join("eval_report.json"),
        to_canonical_json_pretty(&report)?.as_bytes(),
    )?;
    out.push(report.table());
    Ok(())
}

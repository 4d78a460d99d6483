//! Command-line front end: one subcommand per pipeline stage.

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::CliConfig;

use crate::corpus::{self, ArticleSummaryPair};
use crate::metrics::evaluate_corpus;
use crate::seq2seq::{
    checkpoint_file_name, greedy_decode, summarize_text, Checkpoint, ModelError, TrainLogEntry, Trainer,
};
use crate::textproc::{tokenize, EncodedPair, Vocabulary};

#[derive(Debug, Parser)]
#[command(name = "bansum", version, about = "Bengali abstractive news summarizer")]
struct Args {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a configuration key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean and filter a raw dump (`raw_path`) into a dataset (`dataset_path`).
    Prepare,
    /// Print statistics of `dataset_path`.
    Stats,
    /// Shuffle `dataset_path` into `train_path`, `val_path` and `test_path`.
    Split,
    /// Build `vocab_path` from the articles and summaries of `train_path`.
    BuildVocab,
    /// Train on `train_path`/`val_path`, writing checkpoints to `checkpoint_dir`.
    Train,
    /// Summarize each line of `input_path` to standard output.
    Summarize,
    /// Score generated summaries against `test_path`, writing `report_path`.
    Evaluate {
        /// Score the whole test split instead of a seeded sample.
        #[arg(long)]
        full_test: bool,
    },
}

/// Runs the CLI and maps the outcome to a process exit status. Errors are
/// reported as a single line on standard error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                // --help / --version
                let _ = e.print();
            } else {
                let msg = e.to_string();
                let first = msg.lines().next().unwrap_or("invalid arguments");
                eprintln!("{first}");
            }
            return code;
        }
    };
    let stdout = std::io::stdout();
    match run(args, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run(args: Args, out: &mut dyn Write) -> Result<()> {
    let mut cfg = CliConfig::load(args.config.as_deref(), &args.overrides)?;
    match args.command {
        Command::Prepare => prepare(&cfg, out),
        Command::Stats => stats(&cfg, out),
        Command::Split => split(&cfg, out),
        Command::BuildVocab => build_vocab(&cfg, out),
        Command::Train => train(&cfg, out),
        Command::Summarize => summarize(&cfg, out),
        Command::Evaluate { full_test } => {
            cfg.eval_full |= full_test;
            evaluate(&cfg, out)
        }
    }
}

fn prepare(cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let raw_path = cfg.input("raw_path", &cfg.raw_path)?;
    let dataset_path = cfg.output("dataset_path", &cfg.dataset_path)?;
    let records = corpus::load_raw(&raw_path)?;
    let pairs = corpus::filter_pairs(&records);
    corpus::save_dataset(&pairs, &dataset_path)?;
    writeln!(out, "kept {} of {} records", pairs.len(), records.len())?;
    Ok(())
}

fn stats(cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let path = cfg.input("dataset_path", &cfg.dataset_path)?;
    let pairs = corpus::load_dataset(&path)?;
    write!(out, "{}", corpus::dataset_stats(&pairs)?)?;
    Ok(())
}

fn split(cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let path = cfg.input("dataset_path", &cfg.dataset_path)?;
    let train_path = cfg.output("train_path", &cfg.train_path)?;
    let val_path = cfg.output("val_path", &cfg.val_path)?;
    let test_path = cfg.output("test_path", &cfg.test_path)?;
    let pairs = corpus::load_dataset(&path)?;
    let parts = corpus::split_dataset(&pairs, &cfg.split)?;
    corpus::save_dataset(&parts.train, &train_path)?;
    corpus::save_dataset(&parts.val, &val_path)?;
    corpus::save_dataset(&parts.test, &test_path)?;
    writeln!(
        out,
        "train {} val {} test {}",
        parts.train.len(),
        parts.val.len(),
        parts.test.len()
    )?;
    Ok(())
}

fn build_vocab(cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let train_path = cfg.input("train_path", &cfg.train_path)?;
    let vocab_path = cfg.output("vocab_path", &cfg.vocab_path)?;
    let pairs = corpus::load_dataset(&train_path)?;
    let tokens = pairs
        .iter()
        .flat_map(|p| tokenize(&p.article).into_iter().chain(tokenize(&p.summary)));
    let vocab = Vocabulary::build(tokens, cfg.model.vocab_size)?;
    vocab.save(&vocab_path)?;
    writeln!(out, "vocabulary of {} entries", vocab.len())?;
    Ok(())
}

fn encode_pairs(pairs: &[ArticleSummaryPair], vocab: &Vocabulary) -> Vec<EncodedPair> {
    pairs
        .iter()
        .map(|p| EncodedPair {
            source: vocab.encode(&tokenize(&p.article)),
            target: vocab.encode(&tokenize(&p.summary)),
        })
        .collect()
}

fn train(cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let train_path = cfg.input("train_path", &cfg.train_path)?;
    let val_path = cfg.input("val_path", &cfg.val_path)?;
    let vocab_path = cfg.input("vocab_path", &cfg.vocab_path)?;
    let dir = cfg.output("checkpoint_dir", &cfg.checkpoint_dir)?;
    let vocab = Vocabulary::load(&vocab_path)?;
    let train = encode_pairs(&corpus::load_dataset(&train_path)?, &vocab);
    let val = encode_pairs(&corpus::load_dataset(&val_path)?, &vocab);

    let mut trainer = match &cfg.checkpoint_path {
        Some(_) => {
            let path = cfg.input("checkpoint_path", &cfg.checkpoint_path)?;
            let ckpt = Checkpoint::load(&path)?;
            if ckpt.config.vocab_size != vocab.len() {
                bail!(
                    "checkpoint {} expects {} vocabulary entries, {} has {}",
                    path.display(),
                    ckpt.config.vocab_size,
                    vocab_path.display(),
                    vocab.len()
                );
            }
            Trainer::from_checkpoint(ckpt, Some(cfg.model.max_steps))?
        }
        None => {
            let mut model = cfg.model.clone();
            model.vocab_size = vocab.len();
            Trainer::new(model)?
        }
    };
    let outcome = trainer.run(&train, &val, Some(&dir))?;

    let log_path = cfg.train_log_path.clone().unwrap_or_else(|| dir.join("train_log.tsv"));
    let mut log = String::from(TrainLogEntry::TSV_HEADER);
    log.push('\n');
    for entry in &outcome.log {
        log.push_str(&entry.to_tsv());
        log.push('\n');
    }
    std::fs::write(&log_path, log).with_context(|| format!("cannot write {}", log_path.display()))?;
    for entry in &outcome.log {
        writeln!(
            out,
            "step {} lr {} train {:.4} val {:.4}",
            entry.step, entry.learning_rate, entry.train_loss, entry.val_loss
        )?;
    }
    Ok(())
}

/// Highest-step `checkpoint-*.bans` file in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<PathBuf> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("missing checkpoint directory {}", dir.display()))?;
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let step = name
            .strip_prefix("checkpoint-")
            .and_then(|s| s.strip_suffix(".bans"))
            .and_then(|s| s.parse::<u64>().ok());
        if let Some(step) = step {
            if checkpoint_file_name(step) == name && best.as_ref().is_none_or(|(b, _)| step > *b) {
                best = Some((step, path));
            }
        }
    }
    best.map(|(_, p)| p)
        .with_context(|| format!("no checkpoint found in {}", dir.display()))
}

fn load_model(cfg: &CliConfig) -> Result<(Vocabulary, Checkpoint)> {
    let vocab_path = cfg.input("vocab_path", &cfg.vocab_path)?;
    let ckpt_path = match &cfg.checkpoint_path {
        Some(_) => cfg.input("checkpoint_path", &cfg.checkpoint_path)?,
        None => latest_checkpoint(&cfg.input("checkpoint_dir", &cfg.checkpoint_dir)?)?,
    };
    let vocab = Vocabulary::load(&vocab_path)?;
    let ckpt = Checkpoint::load(&ckpt_path)?;
    if ckpt.config.vocab_size != vocab.len() {
        bail!(
            "checkpoint {} expects {} vocabulary entries, {} has {}",
            ckpt_path.display(),
            ckpt.config.vocab_size,
            vocab_path.display(),
            vocab.len()
        );
    }
    Ok((vocab, ckpt))
}

fn summarize(cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let input = cfg.input("input_path", &cfg.input_path)?;
    let (vocab, ckpt) = load_model(cfg)?;
    let text = std::fs::read_to_string(&input).with_context(|| format!("cannot read {}", input.display()))?;
    for line in text.lines() {
        // Lines with nothing left after cleaning still get an (empty) output
        // line so that output stays aligned with input.
        let summary = match summarize_text(line, &vocab, &ckpt.params, &ckpt.config) {
            Ok(s) => s,
            Err(ModelError::EmptyInput) => String::new(),
            Err(e) => return Err(e.into()),
        };
        writeln!(out, "{summary}")?;
    }
    Ok(())
}

fn evaluate(cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let test_path = cfg.input("test_path", &cfg.test_path)?;
    let report_path = cfg.output("report_path", &cfg.report_path)?;
    let (vocab, ckpt) = load_model(cfg)?;
    let pairs = corpus::load_dataset(&test_path)?;
    if pairs.is_empty() {
        bail!("test split {} is empty", test_path.display());
    }
    let chosen: Vec<&ArticleSummaryPair> = if cfg.eval_full || cfg.eval_samples >= pairs.len() {
        pairs.iter().collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(ckpt.config.seed);
        let mut idx = rand::seq::index::sample(&mut rng, pairs.len(), cfg.eval_samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &pairs[i]).collect()
    };
    let largest = ckpt.config.buckets.largest().0;
    let mut candidates = Vec::with_capacity(chosen.len());
    let mut references = Vec::with_capacity(chosen.len());
    for pair in chosen {
        let mut source = tokenize(&pair.article);
        source.truncate(largest);
        let ids = greedy_decode(&vocab.encode(&source), &ckpt.params, &ckpt.config)?;
        candidates.push(vocab.decode(&ids)?);
        references.push(tokenize(&pair.summary));
    }
    let report = evaluate_corpus::<String, _, _>(&candidates, &references)?;
    report.write(&report_path)?;
    writeln!(out, "{}", report.summary_line())?;
    Ok(())
}

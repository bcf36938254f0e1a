// SPDX-License-Identifier: MIT OR Apache-2.0

//! `lsurp`: layer-wise surprisal extraction and reading-time experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lsurp_core::dataset::{load_dataset, AnnotatedDataset, FrequencyLexicon};
use lsurp_core::experiments::{
    run_exp1, run_exp2, run_exp3, write_exp1, write_exp2, write_exp3, AnalysisOptions, Corpus,
    EXP1_FITS, EXP1_SLOWDOWNS, EXP2_CORRELATIONS, EXP2_PPP, EXP3_PPP,
};
use lsurp_core::extract::{extract, ExtractOptions, Extraction, SURPRISAL_FILE, UPDATES_FILE};
use lsurp_core::lm::{load_model, Model, ModelConfig, TranslatorSet, Vocabulary};
use lsurp_core::{io, report, ErrorCategory};
use serde_json::{json, Value};

use config::{LensMode, RunConfig};

const MANIFEST: &str = "run_manifest.json";

/// A command-line usage problem (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "lsurp", version, about = "Layer-wise surprisal and reading-time analyses")]
struct Cli {
    /// JSON run configuration; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: RunConfig,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-layer surprisal and update measures for every dataset sentence.
    Extract,
    /// Run an experiment on an existing extraction.
    Run {
        #[arg(value_enum)]
        experiment: Experiment,
    },
    /// Plot-ready JSON from the experiment CSVs in the output directory.
    Report,
    /// Schema-check the configured dataset, lexicon, tokenizer and model.
    Validate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Exp1,
    Exp2,
    Exp3,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (module, code) = classify(&e);
            eprintln!("error[{module}]: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<lsurp_core::Error>() {
            let code = match core.category() {
                ErrorCategory::Usage => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numerical => 3,
            };
            return (core.module(), code);
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return ("cli", 1);
        }
    }
    ("cli", 2)
}

fn run(cli: Cli) -> Result<()> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.context(UsageError("bad config file".into())))?,
        None => RunConfig::default(),
    };
    let cfg = base.merge(cli.overrides);
    match cli.command {
        Command::Extract => cmd_extract(&cfg),
        Command::Run { experiment } => cmd_run(&cfg, experiment),
        Command::Report => cmd_report(&cfg),
        Command::Validate => cmd_validate(&cfg),
    }
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism())
        .build()
        .context("building worker pool")
}

fn load_lm(cfg: &RunConfig) -> Result<(Model, Vocabulary, Option<TranslatorSet>)> {
    let model = load_model(
        RunConfig::require(&cfg.model_config, "model-config")?,
        RunConfig::require(&cfg.weights, "weights")?,
    )?;
    let vocab = Vocabulary::from_files(
        RunConfig::require(&cfg.vocab, "vocab")?,
        RunConfig::require(&cfg.merges, "merges")?,
    )?;
    let translators = match cfg.lens() {
        LensMode::Logit => None,
        LensMode::Tuned => {
            let p = RunConfig::require(&cfg.translators, "translators")?;
            Some(TranslatorSet::read(p, model.config.d_model)?)
        }
    };
    Ok((model, vocab, translators))
}

fn load_lexicon(cfg: &RunConfig) -> Result<FrequencyLexicon> {
    Ok(match &cfg.lexicon {
        Some(p) => FrequencyLexicon::load(p)?,
        None => FrequencyLexicon::bundled(),
    })
}

fn load_data(cfg: &RunConfig) -> Result<AnnotatedDataset> {
    Ok(load_dataset(RunConfig::require(&cfg.dataset, "dataset")?)?)
}

fn model_name(cfg: &RunConfig, manifest: &Value) -> String {
    if let Some(n) = &cfg.model_name {
        return n.clone();
    }
    if let Some(n) = manifest
        .pointer("/commands/extract/model_name")
        .and_then(Value::as_str)
    {
        return n.to_string();
    }
    cfg.weights
        .as_ref()
        .and_then(|w| w.parent())
        .and_then(|d| d.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn read_manifest(dir: &Path) -> Value {
    io::read_json::<Value>(&dir.join(MANIFEST))
        .ok()
        .filter(Value::is_object)
        .unwrap_or_else(|| json!({}))
}

/// Records one command's effective settings under `commands.<name>`.
fn update_manifest(dir: &Path, name: &str, entry: Value) -> Result<()> {
    let mut m = read_manifest(dir);
    m["tool"] = json!("lsurp");
    m["version"] = json!(env!("CARGO_PKG_VERSION"));
    m["commands"][name] = entry;
    Ok(io::write_json(&dir.join(MANIFEST), &m)?)
}

fn effective_config(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serialises")
}

fn cmd_extract(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output_dir()?;
    let (model, vocab, translators) = load_lm(cfg)?;
    let dataset = load_data(cfg)?;
    let defaults = ExtractOptions::for_model(&model);
    let opts = ExtractOptions {
        layers: cfg.layers.clone().unwrap_or(defaults.layers),
        shallow_layer: cfg.shallow_layer.unwrap_or(defaults.shallow_layer),
        deep_layer: cfg.deep_layer.unwrap_or(defaults.deep_layer),
        decoding: cfg.decoding(),
    };
    let extraction = pool(cfg)?.install(|| extract(&model, &vocab, translators.as_ref(), &dataset, &opts))?;
    extraction.write(out)?;

    let weights = RunConfig::require(&cfg.weights, "weights")?;
    let name = model_name(cfg, &json!({}));
    update_manifest(
        out,
        "extract",
        json!({
            "model_name": name,
            "model_sha256": io::sha256_file(weights)?,
            "model_config": model.config,
            "lens": cfg.lens(),
            "decoding": opts.decoding,
            "layers": opts.layers,
            "shallow_layer": opts.shallow_layer,
            "deep_layer": opts.deep_layer,
            "effective_config": effective_config(cfg),
            "outputs": [SURPRISAL_FILE, UPDATES_FILE],
        }),
    )?;
    let words: usize = extraction.sentences.iter().map(|s| s.words.len()).sum();
    println!(
        "extracted {} sentences, {words} words, {} layers into {}",
        extraction.sentences.len(),
        opts.layers.len(),
        out.display()
    );
    Ok(())
}

fn cmd_run(cfg: &RunConfig, experiment: Experiment) -> Result<()> {
    let out = cfg.output_dir()?;
    let dataset = load_data(cfg)?;
    let lexicon = load_lexicon(cfg)?;
    let extraction = Extraction::read(out)?;
    let manifest = read_manifest(out);
    let opts = AnalysisOptions {
        model_name: model_name(cfg, &manifest),
        cv_folds: cfg.cv_folds(),
    };
    let layers = cfg.layers.clone().unwrap_or_else(|| extraction.layers.clone());
    let corpus = Corpus::new(&dataset, &extraction)?;

    let outputs: Vec<&str> = pool(cfg)?.install(|| -> Result<Vec<&str>> {
        Ok(match experiment {
            Experiment::Exp1 => {
                write_exp1(out, &run_exp1(&corpus, &lexicon, &layers, &opts)?)?;
                vec![EXP1_SLOWDOWNS, EXP1_FITS]
            }
            Experiment::Exp2 => {
                write_exp2(out, &run_exp2(&corpus, &lexicon, &layers, &opts)?)?;
                vec![EXP2_PPP, EXP2_CORRELATIONS]
            }
            Experiment::Exp3 => {
                write_exp3(out, &run_exp3(&corpus, &lexicon, &opts)?)?;
                vec![EXP3_PPP]
            }
        })
    })?;

    let extract_entry = manifest.pointer("/commands/extract").cloned().unwrap_or(Value::Null);
    update_manifest(
        out,
        experiment.name(),
        json!({
            "model_name": opts.model_name,
            "model_sha256": extract_entry.get("model_sha256").cloned().unwrap_or(Value::Null),
            "lens": extract_entry.get("lens").cloned().unwrap_or(Value::Null),
            "decoding": extract_entry.get("decoding").cloned().unwrap_or(Value::Null),
            "layers": layers,
            "shallow_layer": extraction.shallow_layer,
            "deep_layer": extraction.deep_layer,
            "delta_ll": if opts.cv_folds == 0 { json!("in-sample") } else { json!(format!("{}-fold cross-validated", opts.cv_folds)) },
            "normalization_scope": "SU z-scored per layer pair over all extracted words",
            "lexicon": cfg.lexicon.as_ref().map_or(json!("bundled"), |p| json!(p)),
            "effective_config": effective_config(cfg),
            "outputs": outputs,
        }),
    )?;
    println!("{} results written to {}", experiment.name(), out.display());
    Ok(())
}

fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let out = cfg.output_dir()?;
    for p in report::write_reports(out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_validate(cfg: &RunConfig) -> Result<()> {
    let mut checked = 0;
    if let Some(p) = &cfg.dataset {
        let d = load_dataset(p)?;
        println!(
            "dataset: {} pairs, {} fillers, {} target words",
            d.pairs.len(),
            d.fillers.len(),
            d.target_token_count()
        );
        checked += 1;
    }
    if let Some(p) = &cfg.lexicon {
        let l = FrequencyLexicon::load(p)?;
        println!("lexicon: {} entries, oov value {}", l.len(), l.oov_value());
        checked += 1;
    }
    let vocab = match (&cfg.vocab, &cfg.merges) {
        (Some(v), Some(m)) => {
            let vocab = Vocabulary::from_files(v, m)?;
            println!("tokenizer: {} tokens, {} merges", vocab.len(), vocab.merges().len());
            checked += 1;
            Some(vocab)
        }
        _ => None,
    };
    if let Some(c) = &cfg.model_config {
        let config = ModelConfig::load(c)?;
        config.validate()?;
        let d_model = match &cfg.weights {
            Some(w) => {
                let m = Model::from_archive(config.clone(), &lsurp_core::lm::TensorArchive::read(w)?)?;
                m.config.d_model
            }
            None => config.d_model,
        };
        if let Some(v) = &vocab {
            if v.len() != config.vocab_size {
                return Err(lsurp_core::Error::ShapeMismatch(format!(
                    "tokenizer has {} tokens, model vocabulary is {}",
                    v.len(),
                    config.vocab_size
                ))
                .into());
            }
        }
        if let Some(t) = &cfg.translators {
            let set = TranslatorSet::read(t, d_model)?;
            println!("translators: layers {:?}", set.layers().collect::<Vec<_>>());
        }
        println!(
            "model: {} layers, d_model {}, vocab {}",
            config.n_layers, config.d_model, config.vocab_size
        );
        checked += 1;
    }
    if checked == 0 {
        return Err(UsageError("nothing to validate; pass --dataset, --lexicon, --vocab/--merges or --model-config".into()).into());
    }
    println!("ok");
    Ok(())
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: a JSON document merged with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use lsurp_core::measures::Decoding;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LensMode {
    #[default]
    Logit,
    Tuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DecodingArg {
    Leading,
    Trailing,
}

impl From<DecodingArg> for Decoding {
    fn from(d: DecodingArg) -> Self {
        match d {
            DecodingArg::Leading => Decoding::Leading,
            DecodingArg::Trailing => Decoding::Trailing,
        }
    }
}

/// Every setting is optional here; commands check what they need.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Model config JSON.
    #[arg(long, global = true)]
    pub model_config: Option<PathBuf>,
    /// Model weights (safetensors).
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    /// Tokenizer vocabulary (token → id JSON).
    #[arg(long, global = true)]
    pub vocab: Option<PathBuf>,
    /// Tokenizer merges file.
    #[arg(long, global = true)]
    pub merges: Option<PathBuf>,
    /// Label written into every result row.
    #[arg(long, global = true)]
    pub model_name: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub lens: Option<LensMode>,
    /// Per-layer lens translators (safetensors), required with `--lens tuned`.
    #[arg(long, global = true)]
    pub translators: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub decoding: Option<DecodingArg>,
    /// Shallow layer of the update measures (default 1).
    #[arg(long, global = true)]
    pub shallow_layer: Option<usize>,
    /// Deep layer of the update measures (default: last layer).
    #[arg(long, global = true)]
    pub deep_layer: Option<usize>,
    /// Layers to extract or analyse, comma separated (default: all).
    #[arg(long, global = true, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// Reading-time dataset CSV.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Frequency lexicon TSV (default: bundled English snapshot).
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (default 1).
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Cross-validation folds for ΔLL, 0 for in-sample (default 0).
    #[arg(long = "cv", global = true)]
    pub cv_folds: Option<usize>,
}

impl RunConfig {
    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [
            &mut self.model_config,
            &mut self.weights,
            &mut self.vocab,
            &mut self.merges,
            &mut self.translators,
            &mut self.dataset,
            &mut self.lexicon,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: RunConfig) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            model_config, weights, vocab, merges, model_name, lens, translators, decoding,
            shallow_layer, deep_layer, layers, dataset, lexicon, output_dir, parallelism, cv_folds
        )
    }

    pub fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
        match value {
            Some(v) => Ok(v),
            None => bail!(crate::UsageError(format!(
                "`--{flag}` is required (flag or config key `{}`)",
                flag.replace('-', "_")
            ))),
        }
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism.unwrap_or(1).max(1)
    }

    pub fn decoding(&self) -> Decoding {
        self.decoding.map(Decoding::from).unwrap_or_default()
    }

    pub fn lens(&self) -> LensMode {
        self.lens.unwrap_or_default()
    }

    pub fn cv_folds(&self) -> usize {
        self.cv_folds.unwrap_or(0)
    }

    pub fn output_dir(&self) -> Result<&PathBuf> {
        Self::require(&self.output_dir, "output-dir")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win_and_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(&p, r#"{"dataset": "data.csv", "parallelism": 4, "cv_folds": 5}"#).unwrap();
        let file = RunConfig::load(&p).unwrap();
        assert_eq!(file.dataset.as_deref(), Some(dir.path().join("data.csv").as_path()));
        let merged = file.merge(RunConfig {
            parallelism: Some(2),
            ..Default::default()
        });
        assert_eq!(merged.parallelism(), 2);
        assert_eq!(merged.cv_folds(), 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(&p, r#"{"datset": "x"}"#).unwrap();
        assert!(RunConfig::load(&p).is_err());
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared fixtures for the command-line tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lsurp_core::synthetic::{byte_vocabulary, random_model, toy_config, ENGLISH_MERGES};

pub fn mini_sap() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/mini_sap.csv")
}

/// Paths of a seeded toy model written into `dir`.
pub struct ToyModel {
    pub config: PathBuf,
    pub weights: PathBuf,
    pub vocab: PathBuf,
    pub merges: PathBuf,
    pub n_layers: usize,
}

impl ToyModel {
    pub fn write(dir: &Path, n_layers: usize, seed: u64) -> Self {
        std::fs::create_dir_all(dir).unwrap();
        let model = random_model(toy_config(n_layers), seed);
        let t = ToyModel {
            config: dir.join("config.json"),
            weights: dir.join("model.safetensors"),
            vocab: dir.join("vocab.json"),
            merges: dir.join("merges.txt"),
            n_layers,
        };
        std::fs::write(&t.config, serde_json::to_string_pretty(&model.config).unwrap()).unwrap();
        model.to_archive().write(&t.weights).unwrap();
        byte_vocabulary(ENGLISH_MERGES).write_files(&t.vocab, &t.merges).unwrap();
        t
    }

    pub fn args(&self) -> Vec<String> {
        vec![
            "--model-config".into(),
            self.config.display().to_string(),
            "--weights".into(),
            self.weights.display().to_string(),
            "--vocab".into(),
            self.vocab.display().to_string(),
            "--merges".into(),
            self.merges.display().to_string(),
        ]
    }
}

pub fn lsurp<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_lsurp")).args(args).output().unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        stderr(o)
    );
}

pub fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

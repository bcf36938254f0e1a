// SPDX-License-Identifier: MIT OR Apache-2.0

//! Word-form → log10 frequency lookup backed by a two-column TSV.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/wordfreq_en.tsv");

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyLexicon {
    entries: HashMap<String, f64>,
    oov_value: f64,
}

impl FrequencyLexicon {
    /// The shipped English snapshot (40k most frequent forms).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled lexicon is well formed")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `word<TAB>log10_freq` lines. Keys are normalised with
    /// [`FrequencyLexicon::normalize`]; on collision the larger value wins.
    /// The out-of-vocabulary value is the minimum entry minus one.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, f64> = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Lexicon { line: line_no, msg };
            let (word, value) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected `word<TAB>log10_freq`".into()))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{}` is not a number", value.trim())))?;
            if !value.is_finite() {
                return Err(bad("non-finite frequency".into()));
            }
            let key = Self::normalize(word);
            if key.is_empty() {
                continue;
            }
            entries
                .entry(key)
                .and_modify(|v| *v = v.max(value))
                .or_insert(value);
        }
        let min = entries.values().copied().fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(Error::Lexicon {
                line: 0,
                msg: "lexicon has no entries".into(),
            });
        }
        Ok(Self {
            entries,
            oov_value: min - 1.0,
        })
    }

    /// Lowercases and strips leading/trailing non-alphanumeric characters.
    pub fn normalize(word: &str) -> String {
        word.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
    }

    pub fn lookup(&self, word: &str) -> f64 {
        self.entries
            .get(&Self::normalize(word))
            .copied()
            .unwrap_or(self.oov_value)
    }

    pub fn oov_value(&self) -> f64 {
        self.oov_value
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

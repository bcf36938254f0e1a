// SPDX-License-Identifier: MIT OR Apache-2.0

//! The three reading-time analyses over an [`Extraction`] joined with its
//! [`AnnotatedDataset`].
//!
//! * [`run_exp1`]: filler-trained regression, predicted vs observed slowdown
//!   at the disambiguating word and its successor.
//! * [`run_exp2`]: per-layer ΔLL in four ambiguity × region buckets and the
//!   correlation of ΔLL with layer depth.
//! * [`run_exp3`]: ΔLL and likelihood-ratio tests of SU, KL, JS, surprisal,
//!   and of JS added to surprisal.
//!
//! Every output row carries the model name so tables from several models can
//! be concatenated.

mod exp1;
mod exp2;
mod exp3;

pub use exp1::{run_exp1, Exp1Fit, Exp1Result, SlowdownEstimate};
pub use exp2::{run_exp2, Exp2Cell, Exp2Result, LayerPppProfile};
pub use exp3::{run_exp3, Scope, UpdatePppReport};

use std::collections::HashMap;
use std::path::Path;

use crate::dataset::{AnnotatedDataset, Condition, FrequencyLexicon, SentenceRef};
use crate::error::{Error, Result};
use crate::extract::{Extraction, WordMeasures};
use crate::io;
use crate::measures::z_normalize;
use crate::stats::{
    build_features, cv_delta_ll, delta_ll, fit_ols, Design, FeatureTable, Imputer, PppResult,
    RowKey, SentenceInput, WordInput,
};

pub const EXP1_SLOWDOWNS: &str = "exp1_slowdowns.csv";
pub const EXP1_FITS: &str = "exp1_fits.json";
pub const EXP2_PPP: &str = "exp2_ppp.csv";
pub const EXP2_CORRELATIONS: &str = "exp2_correlations.csv";
pub const EXP3_PPP: &str = "exp3_ppp.csv";

/// Shared settings for all experiments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisOptions {
    pub model_name: String,
    /// 0 for in-sample ΔLL, otherwise the number of cross-validation folds.
    pub cv_folds: usize,
}

/// A dataset aligned word-for-word with its extraction.
pub struct Corpus<'a> {
    pub dataset: &'a AnnotatedDataset,
    pub extraction: &'a Extraction,
    sentences: Vec<(SentenceRef<'a>, &'a [WordMeasures])>,
    /// SU z-scored over every extracted word, parallel to `sentences`.
    su_z: Vec<Vec<f64>>,
}

impl<'a> Corpus<'a> {
    pub fn new(dataset: &'a AnnotatedDataset, extraction: &'a Extraction) -> Result<Self> {
        let index: HashMap<(&str, Condition), usize> = extraction
            .sentences
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.item_id.as_str(), s.condition), i))
            .collect();
        let mut sentences = Vec::new();
        for s in dataset.sentences() {
            let Some(&i) = index.get(&(s.item_id, s.condition)) else {
                return Err(Error::MissingPrerequisite(format!(
                    "item {} ({}) is not in the extraction; rerun `lsurp extract` on this dataset",
                    s.item_id, s.condition
                )));
            };
            let words = &extraction.sentences[i].words;
            let aligned = words.len() == s.words.len()
                && words
                    .iter()
                    .zip(s.words)
                    .all(|(m, w)| m.word_index == w.word_index && m.word_text == w.text);
            if !aligned {
                return Err(Error::Contract(format!(
                    "item {} ({}): extraction words differ from the dataset",
                    s.item_id, s.condition
                )));
            }
            sentences.push((s, words.as_slice()));
        }
        let all_su: Vec<f64> = extraction
            .sentences
            .iter()
            .flat_map(|s| s.words.iter().map(|w| w.su_raw))
            .collect();
        let flat = z_normalize(&all_su)?;
        let mut offsets = HashMap::new();
        let mut at = 0;
        for (i, s) in extraction.sentences.iter().enumerate() {
            offsets.insert(i, at);
            at += s.words.len();
        }
        let su_z = sentences
            .iter()
            .map(|(s, _)| {
                let i = index[&(s.item_id, s.condition)];
                let start = offsets[&i];
                flat[start..start + extraction.sentences[i].words.len()].to_vec()
            })
            .collect();
        Ok(Self {
            dataset,
            extraction,
            sentences,
            su_z,
        })
    }

    /// Feature table over all sentences. `measure(word, su_z)` returns the
    /// values of the named measures for one word.
    pub fn table<F>(&self, names: &[&str], lexicon: &FrequencyLexicon, measure: F) -> Result<FeatureTable>
    where
        F: Fn(&WordMeasures, f64) -> Vec<Option<f64>>,
    {
        let inputs: Vec<SentenceInput> = self
            .sentences
            .iter()
            .zip(&self.su_z)
            .map(|((s, m), z)| SentenceInput {
                item_id: s.item_id.to_string(),
                condition: s.condition,
                words: s
                    .words
                    .iter()
                    .zip(*m)
                    .zip(z)
                    .map(|((w, m), &z)| WordInput {
                        word_index: w.word_index,
                        text: w.text.clone(),
                        rt_ms: w.rt_ms,
                        measures: measure(m, z),
                    })
                    .collect(),
            })
            .collect();
        build_features(&inputs, names, lexicon)
    }

    /// Surprisal at `layer` as a single-measure table.
    pub fn surprisal_table(&self, layer: usize, lexicon: &FrequencyLexicon) -> Result<FeatureTable> {
        let pos = self.extraction.layer_position(layer).ok_or_else(|| {
            Error::MissingPrerequisite(format!(
                "layer {layer} was not extracted; rerun `lsurp extract` with it selected"
            ))
        })?;
        self.table(&["surprisal"], lexicon, |w, _| vec![Some(w.surprisal[pos])])
    }
}

/// Row lookup for a feature table.
pub(crate) fn row_index(table: &FeatureTable) -> HashMap<RowKey, usize> {
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.key.clone(), i))
        .collect()
}

/// In-sample (or cross-validated) ΔLL of `full` over `baseline` columns on
/// `rows`; `None` when the rows cannot support the fit.
pub(crate) fn ppp(
    table: &FeatureTable,
    rows: &[usize],
    full: &[String],
    baseline: &[String],
    cv_folds: usize,
) -> Result<Option<PppResult>> {
    let in_sample = || -> Result<PppResult> {
        let f = fit_ols(&Design::build(table, rows, full, None)?)?;
        let b = fit_ols(&Design::build(table, rows, baseline, None)?)?;
        delta_ll(&f, &b)
    };
    let held_out = || -> Result<PppResult> {
        cv_delta_ll(rows, full, baseline, cv_folds, |train, eval, cols| {
            let idx = table.columns(cols)?;
            let imp = Imputer::fit(table, train, &idx);
            Ok((
                Design::build(table, train, cols, Some(&imp))?,
                Design::build(table, eval, cols, Some(&imp))?,
            ))
        })
    };
    let result = if cv_folds == 0 { in_sample() } else { held_out() };
    match result {
        Ok(r) => Ok(Some(r)),
        Err(Error::Contract(_)) | Err(Error::SingularDesign) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Writes Exp1 outputs into `dir`.
pub fn write_exp1(dir: &Path, result: &Exp1Result) -> Result<()> {
    io::write_csv(&dir.join(EXP1_SLOWDOWNS), &result.slowdowns)?;
    io::write_json(&dir.join(EXP1_FITS), &result.fits)
}

pub fn write_exp2(dir: &Path, result: &Exp2Result) -> Result<()> {
    io::write_csv(&dir.join(EXP2_PPP), &result.cells)?;
    io::write_csv(&dir.join(EXP2_CORRELATIONS), &result.profiles)
}

pub fn write_exp3(dir: &Path, rows: &[UpdatePppReport]) -> Result<()> {
    io::write_csv(&dir.join(EXP3_PPP), rows)
}

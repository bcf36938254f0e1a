// SPDX-License-Identifier: MIT OR Apache-2.0

//! Predictive power of the probability-update measures.
//!
//! For each phenomenon and scope, SU (z-scored over the whole extraction),
//! KL, JS and deep-layer surprisal are each tested against the length +
//! frequency baseline, and surprisal + JS is tested against surprisal alone.
//! Every comparison adds three columns (one per lag), so its likelihood-ratio
//! test has three degrees of freedom. `Full` uses every target word of both
//! pair sides, `RoI` the `t*−2 … t*+2` window on both sides. The
//! likelihood-ratio test always uses in-sample fits; `delta_ll` follows the
//! configured mode.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ppp, AnalysisOptions, Corpus};
use crate::dataset::{roi_indices, Condition, FrequencyLexicon, Phenomenon, RoiScheme};
use crate::error::{Error, Result};
use crate::stats::{column_names, lr_test, FeatureTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    Full,
    #[serde(rename = "RoI")]
    Roi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdatePppReport {
    pub model: String,
    pub phenomenon: Phenomenon,
    pub scope: Scope,
    /// `SU`, `KL`, `JS`, `surprisal` or `surprisal+JS`.
    pub measure: String,
    /// `baseline` or `surprisal`.
    pub reference: String,
    pub n: usize,
    pub delta_ll: Option<f64>,
    pub df: usize,
    pub lrt_statistic: Option<f64>,
    pub p_value: Option<f64>,
}

/// Columns of the combined table; names double as feature prefixes.
const TABLE_MEASURES: [&str; 4] = ["surprisal", "su", "kl", "js"];

struct Comparison {
    label: &'static str,
    reference: &'static str,
    full: &'static [&'static str],
    baseline: &'static [&'static str],
}

const COMPARISONS: [Comparison; 5] = [
    Comparison { label: "SU", reference: "baseline", full: &["su"], baseline: &[] },
    Comparison { label: "KL", reference: "baseline", full: &["kl"], baseline: &[] },
    Comparison { label: "JS", reference: "baseline", full: &["js"], baseline: &[] },
    Comparison { label: "surprisal", reference: "baseline", full: &["surprisal"], baseline: &[] },
    Comparison {
        label: "surprisal+JS",
        reference: "surprisal",
        full: &["surprisal", "js"],
        baseline: &["surprisal"],
    },
];

fn measure_table(corpus: &Corpus<'_>, lexicon: &FrequencyLexicon) -> Result<FeatureTable> {
    let deep = corpus.extraction.deep_layer;
    let pos = corpus.extraction.layer_position(deep).ok_or_else(|| {
        Error::MissingPrerequisite(format!(
            "deep layer {deep} has no surprisal in the extraction; include it in the layer list"
        ))
    })?;
    corpus.table(&TABLE_MEASURES, lexicon, |w, su_z| {
        vec![Some(w.surprisal[pos]), Some(su_z), Some(w.kl), Some(w.js)]
    })
}

pub fn run_exp3(
    corpus: &Corpus<'_>,
    lexicon: &FrequencyLexicon,
    opts: &AnalysisOptions,
) -> Result<Vec<UpdatePppReport>> {
    let table = measure_table(corpus, lexicon)?;

    let mut groups: Vec<(Phenomenon, Scope, Vec<usize>)> = Vec::new();
    for phenomenon in Phenomenon::ALL {
        let pairs: Vec<_> = corpus
            .dataset
            .pairs
            .iter()
            .filter(|p| p.phenomenon == phenomenon)
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let mut full_keys = HashSet::new();
        let mut roi_keys = HashSet::new();
        for p in &pairs {
            let roi = roi_indices(p, RoiScheme::Exp2)?;
            for (condition, words, window) in [
                (Condition::Ambiguous, &p.ambiguous, &roi.plus),
                (Condition::Unambiguous, &p.unambiguous, &roi.minus),
            ] {
                for w in words {
                    let key = (p.item_id.as_str(), condition, w.word_index);
                    full_keys.insert(key);
                    if window.contains(&w.word_index) {
                        roi_keys.insert(key);
                    }
                }
            }
        }
        for (scope, keys) in [(Scope::Full, &full_keys), (Scope::Roi, &roi_keys)] {
            let rows: Vec<usize> = table
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| {
                    r.y.is_some()
                        && keys.contains(&(r.key.item_id.as_str(), r.key.condition, r.key.word_index))
                })
                .map(|(i, _)| i)
                .collect();
            groups.push((phenomenon, scope, rows));
        }
    }

    let reports = groups
        .par_iter()
        .map(|(phenomenon, scope, rows)| {
            COMPARISONS
                .iter()
                .map(|c| {
                    let full = column_names(c.full);
                    let base = column_names(c.baseline);
                    let df = full.len() - base.len();
                    let reported = ppp(&table, rows, &full, &base, opts.cv_folds)?;
                    let in_sample = if opts.cv_folds == 0 {
                        reported
                    } else {
                        ppp(&table, rows, &full, &base, 0)?
                    };
                    let lrt = in_sample.map(|r| lr_test(r.delta_ll, df)).transpose()?;
                    Ok(UpdatePppReport {
                        model: opts.model_name.clone(),
                        phenomenon: *phenomenon,
                        scope: *scope,
                        measure: c.label.to_string(),
                        reference: c.reference.to_string(),
                        n: rows.len(),
                        delta_ll: reported.map(|r| r.delta_ll),
                        df,
                        lrt_statistic: lrt.map(|l| l.statistic),
                        p_value: lrt.map(|l| l.p_value),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reports.into_iter().flatten().collect())
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Slowdown estimation from a filler-trained regression.
//!
//! For each layer a surprisal + length + frequency regression (with two-word
//! spillover) is fitted on filler sentences. For every pair, the slowdown is
//! `Σ_k (ŷ⁺[t*⁺+k] − ŷ⁻[t*⁻+k])` over offsets `k ∈ {0, 1}` present on both
//! sides with an observed reading time on both sides; the human slowdown
//! applies the same sum to observed reading times. Both are averaged over
//! the pairs of a phenomenon.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{row_index, AnalysisOptions, Corpus};
use crate::dataset::{Condition, FrequencyLexicon, Phenomenon};
use crate::error::{Error, Result};
use crate::stats::{column_names, fit_ols, Design, Imputer, RegressionFit, RowKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowdownEstimate {
    pub model: String,
    pub phenomenon: Phenomenon,
    pub layer: usize,
    pub estimated_ms: f64,
    pub human_ms: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exp1Fit {
    pub model: String,
    pub layer: usize,
    pub fit: RegressionFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp1Result {
    pub slowdowns: Vec<SlowdownEstimate>,
    pub fits: Vec<Exp1Fit>,
}

const OFFSETS: [usize; 2] = [0, 1];

pub fn run_exp1(
    corpus: &Corpus<'_>,
    lexicon: &FrequencyLexicon,
    layers: &[usize],
    opts: &AnalysisOptions,
) -> Result<Exp1Result> {
    let per_layer = layers
        .par_iter()
        .map(|&layer| exp1_layer(corpus, lexicon, layer, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut slowdowns = Vec::new();
    let mut fits = Vec::new();
    for (rows, fit) in per_layer {
        slowdowns.extend(rows);
        fits.push(fit);
    }
    // Phenomenon-major, layer-minor.
    slowdowns.sort_by_key(|s| (s.phenomenon, s.layer));
    Ok(Exp1Result { slowdowns, fits })
}

fn exp1_layer(
    corpus: &Corpus<'_>,
    lexicon: &FrequencyLexicon,
    layer: usize,
    opts: &AnalysisOptions,
) -> Result<(Vec<SlowdownEstimate>, Exp1Fit)> {
    let table = corpus.surprisal_table(layer, lexicon)?;
    let names = column_names(&["surprisal"]);
    let cols = table.columns(&names)?;
    let train: Vec<usize> = table
        .observed()
        .into_iter()
        .filter(|&r| table.rows[r].key.condition == Condition::Filler)
        .collect();
    if train.is_empty() {
        return Err(Error::Contract(
            "slowdown estimation needs filler sentences with reading times".into(),
        ));
    }
    let imputer = Imputer::fit(&table, &train, &cols);
    let fit = fit_ols(&Design::build(&table, &train, &names, Some(&imputer))?)?;
    let index = row_index(&table);

    let predict = |item: &str, condition: Condition, word_index: usize| -> Option<(f64, f64)> {
        let key = RowKey {
            item_id: item.to_string(),
            condition,
            word_index,
        };
        let &r = index.get(&key)?;
        let y = table.rows[r].y?;
        let d = Design::build(&table, &[r], &names, Some(&imputer)).ok()?;
        Some((fit.predict_row(d.x.row(0)), y))
    };

    let mut acc: BTreeMap<Phenomenon, (f64, f64, usize)> = BTreeMap::new();
    for pair in &corpus.dataset.pairs {
        let mut est = 0.0;
        let mut human = 0.0;
        let mut used = 0;
        for k in OFFSETS {
            let plus = predict(&pair.item_id, Condition::Ambiguous, pair.t_star_plus + k);
            let minus = predict(&pair.item_id, Condition::Unambiguous, pair.t_star_minus + k);
            if let (Some((yh_p, y_p)), Some((yh_m, y_m))) = (plus, minus) {
                est += yh_p - yh_m;
                human += y_p - y_m;
                used += 1;
            }
        }
        if used > 0 {
            let e = acc.entry(pair.phenomenon).or_insert((0.0, 0.0, 0));
            e.0 += est;
            e.1 += human;
            e.2 += 1;
        }
    }
    let rows = acc
        .into_iter()
        .map(|(phenomenon, (est, human, n))| SlowdownEstimate {
            model: opts.model_name.clone(),
            phenomenon,
            layer,
            estimated_ms: est / n as f64,
            human_ms: human / n as f64,
            n_pairs: n,
        })
        .collect();
    Ok((
        rows,
        Exp1Fit {
            model: opts.model_name.clone(),
            layer,
            fit,
        },
    ))
}

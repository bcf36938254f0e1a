// SPDX-License-Identifier: MIT OR Apache-2.0

//! Layer-wise ΔLL in the four ambiguity × region buckets.
//!
//! Buckets use the `t*−2 … t*+2` window. For every phenomenon, bucket and
//! layer, the surprisal regression is compared with the length + frequency
//! baseline on the bucket's observed words; then ΔLL is correlated with the
//! layer index. Cells that cannot be fitted are reported as missing.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ppp, row_index, AnalysisOptions, Corpus};
use crate::dataset::{
    split_conditions, Ambiguity, Condition, ConditionKey, FrequencyLexicon, Phenomenon, RoiScheme,
};
use crate::error::Result;
use crate::stats::{column_names, pearson, FeatureTable, RowKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Cell {
    pub model: String,
    pub phenomenon: Phenomenon,
    #[serde(with = "condition_key")]
    pub condition: ConditionKey,
    pub layer: usize,
    pub n: usize,
    pub delta_ll: Option<f64>,
    pub ll_full: Option<f64>,
    pub ll_baseline: Option<f64>,
    pub df_diff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPppProfile {
    pub model: String,
    pub phenomenon: Phenomenon,
    #[serde(with = "condition_key")]
    pub condition: ConditionKey,
    /// Layers with a ΔLL value, i.e. the layers the correlation is over.
    pub n_layers: usize,
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp2Result {
    pub cells: Vec<Exp2Cell>,
    pub profiles: Vec<LayerPppProfile>,
}

impl Exp2Result {
    /// ΔLL per layer for one bucket, in layer order.
    pub fn series(&self, phenomenon: Phenomenon, condition: ConditionKey) -> Vec<(usize, Option<f64>)> {
        self.cells
            .iter()
            .filter(|c| c.phenomenon == phenomenon && c.condition == condition)
            .map(|c| (c.layer, c.delta_ll))
            .collect()
    }

    pub fn correlation(&self, phenomenon: Phenomenon, condition: ConditionKey) -> Option<f64> {
        self.profiles
            .iter()
            .find(|p| p.phenomenon == phenomenon && p.condition == condition)
            .and_then(|p| p.pearson_r)
    }
}

pub(crate) mod condition_key {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::dataset::ConditionKey;

    pub fn serialize<S: Serializer>(k: &ConditionKey, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(k)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ConditionKey, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pearson r of `(layer, ΔLL)` over the layers that have a value.
pub fn depth_correlation(series: &[(usize, Option<f64>)]) -> (usize, Option<f64>) {
    let (x, y): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter_map(|&(l, v)| v.map(|v| (l as f64, v)))
        .unzip();
    (x.len(), pearson(&x, &y).ok())
}

pub fn run_exp2(
    corpus: &Corpus<'_>,
    lexicon: &FrequencyLexicon,
    layers: &[usize],
    opts: &AnalysisOptions,
) -> Result<Exp2Result> {
    let buckets = split_conditions(corpus.dataset, RoiScheme::Exp2)?;
    let full = column_names(&["surprisal"]);
    let baseline = column_names(&[]);

    let tables: Vec<FeatureTable> = layers
        .par_iter()
        .map(|&l| corpus.surprisal_table(l, lexicon))
        .collect::<Result<_>>()?;
    // Row indices are identical across layers: same sentences, same order.
    let index = match tables.first() {
        Some(t) => row_index(t),
        None => HashMap::new(),
    };

    let mut groups: Vec<(Phenomenon, ConditionKey, Vec<usize>)> = Vec::new();
    for phenomenon in Phenomenon::ALL {
        for (&key, tokens) in &buckets {
            let rows: Vec<usize> = tokens
                .iter()
                .filter(|t| corpus.dataset.pairs[t.pair].phenomenon == phenomenon)
                .filter_map(|t| {
                    let pair = &corpus.dataset.pairs[t.pair];
                    let condition = match t.ambiguity {
                        Ambiguity::Ambiguous => Condition::Ambiguous,
                        Ambiguity::Unambiguous => Condition::Unambiguous,
                    };
                    index.get(&RowKey {
                        item_id: pair.item_id.clone(),
                        condition,
                        word_index: t.word_index,
                    })
                })
                .copied()
                .filter(|&r| tables[0].rows[r].y.is_some())
                .collect();
            if corpus.dataset.pairs.iter().any(|p| p.phenomenon == phenomenon) {
                groups.push((phenomenon, key, rows));
            }
        }
    }

    let cells_per_group = groups
        .par_iter()
        .map(|(phenomenon, key, rows)| {
            layers
                .iter()
                .zip(&tables)
                .map(|(&layer, table)| {
                    let r = ppp(table, rows, &full, &baseline, opts.cv_folds)?;
                    Ok(Exp2Cell {
                        model: opts.model_name.clone(),
                        phenomenon: *phenomenon,
                        condition: *key,
                        layer,
                        n: rows.len(),
                        delta_ll: r.map(|r| r.delta_ll),
                        ll_full: r.map(|r| r.ll_full),
                        ll_baseline: r.map(|r| r.ll_baseline),
                        df_diff: r.map(|r| r.df_diff),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut profiles = Vec::new();
    for ((phenomenon, key, _), group) in groups.iter().zip(cells_per_group) {
        let series: Vec<(usize, Option<f64>)> = group.iter().map(|c| (c.layer, c.delta_ll)).collect();
        let (n_layers, pearson_r) = depth_correlation(&series);
        profiles.push(LayerPppProfile {
            model: opts.model_name.clone(),
            phenomenon: *phenomenon,
            condition: *key,
            n_layers,
            pearson_r,
        });
        cells.extend(group);
    }
    Ok(Exp2Result { cells, profiles })
}

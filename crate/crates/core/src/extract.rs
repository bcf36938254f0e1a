// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-word measures for every sentence of a dataset.
//!
//! Each sentence is encoded behind an end-of-text token and run through the
//! model once. Layers are decoded one at a time and dropped as soon as they
//! are no longer needed, so memory stays at roughly three layers per
//! sentence. Sentences are processed with rayon in whatever pool the caller
//! installs; results are collected in dataset order.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotatedDataset, Condition, SentenceRef};
use crate::error::{Error, Result};
use crate::io;
use crate::lm::{Model, TranslatorSet, Vocabulary};
use crate::measures::{
    decoded_word_surprisal, encode_sentence, surprisal_update, Decoding, SentenceLens,
};

pub const SURPRISAL_FILE: &str = "surprisal.csv";
pub const UPDATES_FILE: &str = "updates.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Layers to report surprisal for, ascending.
    pub layers: Vec<usize>,
    pub shallow_layer: usize,
    pub deep_layer: usize,
    pub decoding: Decoding,
}

impl ExtractOptions {
    /// All layers, block 1 against the last layer, trailing decoding.
    pub fn for_model(model: &Model) -> Self {
        let n = model.config.n_layers;
        Self {
            layers: (0..=n).collect(),
            shallow_layer: 1.min(n),
            deep_layer: n,
            decoding: Decoding::Trailing,
        }
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        let bound = model.config.n_layers + 1;
        for &l in self
            .layers
            .iter()
            .chain([&self.shallow_layer, &self.deep_layer])
        {
            if l >= bound {
                return Err(Error::IndexOutOfRange {
                    what: "layer",
                    index: l,
                    bound,
                });
            }
        }
        if self.layers.is_empty() {
            return Err(Error::Contract("no layers selected".into()));
        }
        if self.layers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("layers must be strictly ascending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordMeasures {
    pub word_index: usize,
    pub word_text: String,
    /// Surprisal (nats) per entry of [`Extraction::layers`].
    pub surprisal: Vec<f64>,
    pub su_raw: f64,
    pub kl: f64,
    pub js: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMeasures {
    pub item_id: String,
    pub condition: Condition,
    pub words: Vec<WordMeasures>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub layers: Vec<usize>,
    pub shallow_layer: usize,
    pub deep_layer: usize,
    pub sentences: Vec<SentenceMeasures>,
}

pub fn extract_sentence(
    model: &Model,
    vocab: &Vocabulary,
    boundary: &[bool],
    translators: Option<&TranslatorSet>,
    sentence: SentenceRef<'_>,
    opts: &ExtractOptions,
) -> Result<SentenceMeasures> {
    let texts: Vec<&str> = sentence.words.iter().map(|w| w.text.as_str()).collect();
    let (ids, spans) = encode_sentence(vocab, &texts)?;
    let mut lens = SentenceLens::new(model, ids.clone(), translators)?;

    let mut needed: BTreeSet<usize> = opts.layers.iter().copied().collect();
    needed.insert(opts.shallow_layer);
    needed.insert(opts.deep_layer);
    let keep = [opts.shallow_layer, opts.deep_layer];

    let n_words = spans.len();
    let mut per_layer: HashMap<usize, Vec<f64>> = HashMap::new();
    for &layer in &needed {
        let dists = lens.layer(layer)?;
        let values = spans
            .iter()
            .map(|span| {
                decoded_word_surprisal(opts.decoding, dists, &ids, span, vocab, boundary)
            })
            .collect::<Result<Vec<f64>>>()?;
        per_layer.insert(layer, values);
        lens.retain_layers(&keep);
    }

    let mut words = Vec::with_capacity(n_words);
    for (i, (span, w)) in spans.iter().zip(sentence.words).enumerate() {
        let update = lens.word_update_measures(span, opts.shallow_layer, opts.deep_layer)?;
        let su = surprisal_update(
            per_layer[&opts.shallow_layer][i],
            per_layer[&opts.deep_layer][i],
        );
        words.push(WordMeasures {
            word_index: w.word_index,
            word_text: w.text.clone(),
            surprisal: opts.layers.iter().map(|l| per_layer[l][i]).collect(),
            su_raw: su,
            kl: update.kl,
            js: update.js,
        });
    }
    Ok(SentenceMeasures {
        item_id: sentence.item_id.to_string(),
        condition: sentence.condition,
        words,
    })
}

/// Extracts every sentence of `dataset`, in parallel over sentences.
pub fn extract(
    model: &Model,
    vocab: &Vocabulary,
    translators: Option<&TranslatorSet>,
    dataset: &AnnotatedDataset,
    opts: &ExtractOptions,
) -> Result<Extraction> {
    opts.validate(model)?;
    if vocab.len() != model.config.vocab_size {
        return Err(Error::ShapeMismatch(format!(
            "tokenizer has {} tokens, model vocabulary is {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    let boundary = vocab.boundary_mask();
    let sentences = dataset
        .sentences()
        .into_par_iter()
        .map(|s| extract_sentence(model, vocab, &boundary, translators, s, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(Extraction {
        layers: opts.layers.clone(),
        shallow_layer: opts.shallow_layer,
        deep_layer: opts.deep_layer,
        sentences,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SurprisalRow {
    item_id: String,
    condition: Condition,
    word_index: usize,
    word_text: String,
    layer: usize,
    surprisal_nats: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct UpdateRow {
    item_id: String,
    condition: Condition,
    word_index: usize,
    word_text: String,
    shallow_layer: usize,
    deep_layer: usize,
    su_raw: f64,
    kl: f64,
    js: f64,
}

impl Extraction {
    pub fn surprisal_csv(&self) -> Result<Vec<u8>> {
        let mut rows = Vec::new();
        for s in &self.sentences {
            for w in &s.words {
                for (&layer, &v) in self.layers.iter().zip(&w.surprisal) {
                    rows.push(SurprisalRow {
                        item_id: s.item_id.clone(),
                        condition: s.condition,
                        word_index: w.word_index,
                        word_text: w.word_text.clone(),
                        layer,
                        surprisal_nats: v,
                    });
                }
            }
        }
        io::csv_bytes(Path::new(SURPRISAL_FILE), &rows)
    }

    pub fn updates_csv(&self) -> Result<Vec<u8>> {
        let rows: Vec<UpdateRow> = self
            .sentences
            .iter()
            .flat_map(|s| {
                s.words.iter().map(|w| UpdateRow {
                    item_id: s.item_id.clone(),
                    condition: s.condition,
                    word_index: w.word_index,
                    word_text: w.word_text.clone(),
                    shallow_layer: self.shallow_layer,
                    deep_layer: self.deep_layer,
                    su_raw: w.su_raw,
                    kl: w.kl,
                    js: w.js,
                })
            })
            .collect();
        io::csv_bytes(Path::new(UPDATES_FILE), &rows)
    }

    /// Writes `surprisal.csv` and `updates.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_atomic(&dir.join(SURPRISAL_FILE), &self.surprisal_csv()?)?;
        io::write_atomic(&dir.join(UPDATES_FILE), &self.updates_csv()?)
    }

    /// Reads back the files written by [`Extraction::write`].
    pub fn read(dir: &Path) -> Result<Self> {
        let sp = dir.join(SURPRISAL_FILE);
        let up = dir.join(UPDATES_FILE);
        for p in [&sp, &up] {
            if !p.exists() {
                return Err(Error::MissingPrerequisite(format!(
                    "{} not found; run `lsurp extract` first",
                    p.display()
                )));
            }
        }
        let surprisal: Vec<SurprisalRow> = io::read_csv(&sp)?;
        let updates: Vec<UpdateRow> = io::read_csv(&up)?;
        let layers: Vec<usize> = surprisal
            .iter()
            .map(|r| r.layer)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let (shallow_layer, deep_layer) = match updates.first() {
            Some(u) => (u.shallow_layer, u.deep_layer),
            None => {
                return Err(Error::Contract(format!("{} is empty", up.display())));
            }
        };

        let mut by_word: HashMap<(String, Condition, usize), Vec<(usize, f64)>> = HashMap::new();
        for r in surprisal {
            by_word
                .entry((r.item_id, r.condition, r.word_index))
                .or_default()
                .push((r.layer, r.surprisal_nats));
        }
        let mut sentences: Vec<SentenceMeasures> = Vec::new();
        let mut index: HashMap<(String, Condition), usize> = HashMap::new();
        for u in updates {
            if (u.shallow_layer, u.deep_layer) != (shallow_layer, deep_layer) {
                return Err(Error::Contract(format!(
                    "{} mixes layer pairs",
                    up.display()
                )));
            }
            let mut values = by_word
                .remove(&(u.item_id.clone(), u.condition, u.word_index))
                .unwrap_or_default();
            values.sort_by_key(|&(l, _)| l);
            if values.iter().map(|&(l, _)| l).ne(layers.iter().copied()) {
                return Err(Error::Contract(format!(
                    "item {} ({}) word {}: surprisal rows do not cover layers {layers:?}",
                    u.item_id, u.condition, u.word_index
                )));
            }
            let key = (u.item_id.clone(), u.condition);
            let si = *index.entry(key).or_insert_with(|| {
                sentences.push(SentenceMeasures {
                    item_id: u.item_id.clone(),
                    condition: u.condition,
                    words: Vec::new(),
                });
                sentences.len() - 1
            });
            sentences[si].words.push(WordMeasures {
                word_index: u.word_index,
                word_text: u.word_text,
                surprisal: values.into_iter().map(|(_, v)| v).collect(),
                su_raw: u.su_raw,
                kl: u.kl,
                js: u.js,
            });
        }
        if let Some(((item, c, w), _)) = by_word.into_iter().next() {
            return Err(Error::Contract(format!(
                "item {item} ({c}) word {w} has surprisal rows but no update row"
            )));
        }
        Ok(Self {
            layers,
            shallow_layer,
            deep_layer,
            sentences,
        })
    }

    pub fn layer_position(&self, layer: usize) -> Option<usize> {
        self.layers.iter().position(|&l| l == layer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AnnotatedWord, FillerSentence};
    use crate::synthetic;

    fn dataset() -> AnnotatedDataset {
        let words = |ws: &[&str]| {
            ws.iter()
                .enumerate()
                .map(|(i, t)| AnnotatedWord {
                    word_index: i + 1,
                    text: t.to_string(),
                    rt_ms: Some(300.0),
                    is_disambiguating: false,
                })
                .collect()
        };
        AnnotatedDataset {
            pairs: vec![],
            fillers: vec![
                FillerSentence {
                    item_id: "a".into(),
                    words: words(&["The", "girl", "fed", "the", "lamb."]),
                },
                FillerSentence {
                    item_id: "b".into(),
                    words: words(&["A", "lamb", "remained"]),
                },
            ],
        }
    }

    #[test]
    fn extraction_roundtrips_through_csv() {
        let model = synthetic::random_model(synthetic::toy_config(2), 4);
        let vocab = synthetic::byte_vocabulary(synthetic::ENGLISH_MERGES);
        let opts = ExtractOptions::for_model(&model);
        let ext = extract(&model, &vocab, None, &dataset(), &opts).unwrap();
        assert_eq!(ext.sentences.len(), 2);
        assert_eq!(ext.sentences[0].words[4].surprisal.len(), 3);
        let dir = tempfile::tempdir().unwrap();
        ext.write(dir.path()).unwrap();
        let rows = std::fs::read_to_string(dir.path().join(SURPRISAL_FILE)).unwrap();
        assert_eq!(rows.lines().count(), 1 + 8 * 3);
        let back = Extraction::read(dir.path()).unwrap();
        assert_eq!(back, ext);
    }

    #[test]
    fn su_is_the_decoded_surprisal_difference() {
        let model = synthetic::random_model(synthetic::toy_config(3), 8);
        let vocab = synthetic::byte_vocabulary(synthetic::ENGLISH_MERGES);
        let opts = ExtractOptions {
            layers: vec![1, 3],
            shallow_layer: 1,
            deep_layer: 3,
            decoding: Decoding::Leading,
        };
        let ext = extract(&model, &vocab, None, &dataset(), &opts).unwrap();
        for w in &ext.sentences[1].words {
            assert_eq!(w.su_raw, w.surprisal[0] - w.surprisal[1]);
            assert!(w.kl >= 0.0 && (0.0..=std::f64::consts::LN_2 * 4.0).contains(&w.js));
        }
    }

    #[test]
    fn options_are_validated() {
        let model = synthetic::random_model(synthetic::toy_config(1), 1);
        let mut opts = ExtractOptions::for_model(&model);
        opts.deep_layer = 2;
        assert!(opts.validate(&model).is_err());
        let mut opts = ExtractOptions::for_model(&model);
        opts.layers = vec![1, 0];
        assert!(opts.validate(&model).is_err());
    }

    #[test]
    fn missing_files_name_the_prerequisite() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Extraction::read(dir.path()),
            Err(Error::MissingPrerequisite(_))
        ));
    }
}

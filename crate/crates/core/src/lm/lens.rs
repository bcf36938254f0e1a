// SPDX-License-Identifier: MIT OR Apache-2.0

//! Decoding intermediate residual states into next-token distributions.
//!
//! The logit lens reads layer `l` as `softmax(W_U · ln_f(h))`, reusing the
//! model's *final* layer norm at every depth. The tuned-lens variant first
//! passes `h` through a per-layer affine translator `A h + b`. Logits are
//! accumulated in f64 and the softmax is max-subtracted.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::archive::TensorArchive;
use super::forward::LayerStack;
use super::model::Model;
use crate::error::{Error, Result};

/// Per-layer affine map applied before the final layer norm.
#[derive(Debug, Clone, PartialEq)]
pub struct LensTranslator {
    pub layer: usize,
    /// `[d, d]`, applied as `A h`.
    pub matrix: Array2<f32>,
    pub bias: Array1<f32>,
}

impl LensTranslator {
    pub fn identity(layer: usize, d_model: usize) -> Self {
        Self {
            layer,
            matrix: Array2::eye(d_model),
            bias: Array1::zeros(d_model),
        }
    }

    pub fn d_model(&self) -> usize {
        self.bias.len()
    }

    /// Applies the map to every row of `h` (`[seq, d]`).
    pub fn apply(&self, h: ArrayView2<'_, f32>) -> Array2<f32> {
        h.dot(&self.matrix.t()) + &self.bias
    }
}

/// Translators keyed by layer; layers without an entry decode as plain logit lens.
#[derive(Debug, Clone, Default)]
pub struct TranslatorSet {
    by_layer: BTreeMap<usize, LensTranslator>,
}

impl TranslatorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: LensTranslator) {
        self.by_layer.insert(t.layer, t);
    }

    pub fn get(&self, layer: usize) -> Option<&LensTranslator> {
        self.by_layer.get(&layer)
    }

    pub fn layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_layer.keys().copied()
    }

    /// Reads `layers.{l}.weight` (`[d, d]`) and `layers.{l}.bias` (`[d]`)
    /// pairs from a safetensors archive.
    pub fn read(path: &Path, d_model: usize) -> Result<Self> {
        Self::from_archive(&TensorArchive::read(path)?, d_model)
    }

    pub fn from_archive(archive: &TensorArchive, d_model: usize) -> Result<Self> {
        let mut set = Self::new();
        for name in archive.names() {
            let Some(rest) = name.strip_prefix("layers.") else {
                continue;
            };
            let Some(idx) = rest.strip_suffix(".weight") else {
                continue;
            };
            let layer: usize = idx
                .parse()
                .map_err(|_| Error::Archive(format!("bad translator tensor name `{name}`")))?;
            set.insert(LensTranslator {
                layer,
                matrix: archive.matrix(name, d_model, d_model)?,
                bias: archive.vector(&format!("layers.{layer}.bias"), d_model)?,
            });
        }
        Ok(set)
    }

    pub fn to_archive(&self) -> TensorArchive {
        let mut a = TensorArchive::new();
        for t in self.by_layer.values() {
            a.insert(
                format!("layers.{}.weight", t.layer),
                t.matrix.shape().to_vec(),
                t.matrix.iter().copied().collect(),
            );
            a.insert(format!("layers.{}.bias", t.layer), vec![t.bias.len()], t.bias.to_vec());
        }
        a
    }
}

/// Next-token distribution decoded from one (layer, position).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDistribution {
    pub layer: usize,
    pub position: usize,
    pub probs: Vec<f64>,
}

impl LayerDistribution {
    pub fn prob(&self, id: u32) -> f64 {
        self.probs[id as usize]
    }
}

/// Max-subtracted softmax in f64.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

fn check_layer(model: &Model, stack: &LayerStack, layer: usize) -> Result<()> {
    let bound = model.config.n_layers + 1;
    if layer >= bound || layer >= stack.n_states() {
        return Err(Error::IndexOutOfRange {
            what: "layer",
            index: layer,
            bound,
        });
    }
    Ok(())
}

fn check_translator(model: &Model, translator: Option<&LensTranslator>) -> Result<()> {
    if let Some(t) = translator {
        let d = model.config.d_model;
        if t.matrix.dim() != (d, d) || t.bias.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "translator for layer {} has matrix {:?} and bias [{}], model d_model is {d}",
                t.layer,
                t.matrix.dim(),
                t.bias.len()
            )));
        }
    }
    Ok(())
}

fn decode_rows(
    model: &Model,
    h: ArrayView2<'_, f32>,
    layer: usize,
    first_position: usize,
    translator: Option<&LensTranslator>,
) -> Vec<LayerDistribution> {
    let z = match translator {
        Some(t) => model.final_layernorm.apply(t.apply(h).view()),
        None => model.final_layernorm.apply(h),
    }
    .mapv(f64::from);
    let logits = z.dot(model.unembedding_t());
    logits
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| LayerDistribution {
            layer,
            position: first_position + i,
            probs: softmax(row.as_slice().expect("row-major logits")),
        })
        .collect()
}

/// Distribution at a single `(layer, position)`.
pub fn lens_distribution(
    model: &Model,
    stack: &LayerStack,
    layer: usize,
    position: usize,
    translator: Option<&LensTranslator>,
) -> Result<LayerDistribution> {
    check_layer(model, stack, layer)?;
    check_translator(model, translator)?;
    if position >= stack.seq_len() {
        return Err(Error::IndexOutOfRange {
            what: "position",
            index: position,
            bound: stack.seq_len(),
        });
    }
    let h = stack.layer(layer);
    let row = h.slice(ndarray::s![position..position + 1, ..]);
    Ok(decode_rows(model, row, layer, position, translator)
        .pop()
        .expect("one row"))
}

/// Distributions at every position of one layer, decoded in a single batch.
pub fn decode_layer(
    model: &Model,
    stack: &LayerStack,
    layer: usize,
    translator: Option<&LensTranslator>,
) -> Result<Vec<LayerDistribution>> {
    check_layer(model, stack, layer)?;
    check_translator(model, translator)?;
    Ok(decode_rows(model, stack.layer(layer), layer, 0, translator))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{forward_collect, ModelConfig};
    use crate::synthetic;

    fn model(n_layers: usize, seed: u64) -> Model {
        synthetic::random_model(
            ModelConfig {
                n_layers,
                d_model: 8,
                n_heads: 2,
                vocab_size: 13,
                max_context: 8,
                ln_epsilon: 1e-5,
            },
            seed,
        )
    }

    #[test]
    fn equal_components_decode_to_uniform() {
        let mut m = model(0, 1);
        m.final_layernorm.gain.fill(1.0);
        m.final_layernorm.bias.fill(0.0);
        // Every state component equal: layer norm maps it to the zero vector.
        m.token_embeddings.fill(0.75);
        m.position_embeddings.fill(0.25);
        let stack = forward_collect(&m, &[2, 5]).unwrap();
        let dist = lens_distribution(&m, &stack, 0, 1, None).unwrap();
        for p in &dist.probs {
            assert!((p - 1.0 / 13.0).abs() < 1e-12);
        }
    }

    #[test]
    fn last_layer_matches_model_head() {
        let m = model(2, 7);
        let ids = [1, 4, 9, 12, 0];
        let stack = forward_collect(&m, &ids).unwrap();
        let lens = decode_layer(&m, &stack, 2, None).unwrap();
        let head = m.output_distributions(&ids).unwrap();
        for (l, h) in lens.iter().zip(&head) {
            for (a, b) in l.probs.iter().zip(h) {
                assert!((a - b).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn identity_translator_is_bitwise_noop() {
        let m = model(2, 11);
        let stack = forward_collect(&m, &[3, 3, 8]).unwrap();
        let id = LensTranslator::identity(1, 8);
        let plain = decode_layer(&m, &stack, 1, None).unwrap();
        let tuned = decode_layer(&m, &stack, 1, Some(&id)).unwrap();
        assert_eq!(plain, tuned);
    }

    #[test]
    fn single_position_agrees_with_batch() {
        let m = model(1, 2);
        let stack = forward_collect(&m, &[5, 6, 7]).unwrap();
        let batch = decode_layer(&m, &stack, 1, None).unwrap();
        let one = lens_distribution(&m, &stack, 1, 2, None).unwrap();
        for (a, b) in one.probs.iter().zip(&batch[2].probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_and_bad_translator() {
        let m = model(1, 2);
        let stack = forward_collect(&m, &[5, 6]).unwrap();
        assert!(matches!(
            lens_distribution(&m, &stack, 2, 0, None),
            Err(Error::IndexOutOfRange { what: "layer", .. })
        ));
        assert!(matches!(
            lens_distribution(&m, &stack, 0, 2, None),
            Err(Error::IndexOutOfRange { what: "position", .. })
        ));
        let bad = LensTranslator::identity(0, 4);
        assert!(matches!(
            lens_distribution(&m, &stack, 0, 0, Some(&bad)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn translator_archive_roundtrip() {
        let mut set = TranslatorSet::new();
        let mut t = LensTranslator::identity(3, 4);
        t.matrix[[0, 1]] = 0.5;
        t.bias[2] = -1.0;
        set.insert(t.clone());
        let back = TranslatorSet::from_archive(
            &TensorArchive::from_bytes(&set.to_archive().to_bytes().unwrap()).unwrap(),
            4,
        )
        .unwrap();
        assert_eq!(back.get(3), Some(&t));
        assert!(back.get(0).is_none());
    }
}

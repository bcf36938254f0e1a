// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded toy models and vocabularies for tests, fixtures and benchmarks.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::lm::{byte_to_unicode, Model, ModelConfig, TensorArchive, Vocabulary, END_OF_TEXT};

/// GPT-2 shaped model with Gaussian weights (std 0.3 for matrices, 0.1 for
/// vectors, layer-norm gains centred on 1). The MLP width is `4 * d_model`.
pub fn random_model(config: ModelConfig, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wide = Normal::new(0.0f32, 0.3).expect("valid std");
    let narrow = Normal::new(0.0f32, 0.1).expect("valid std");
    let mut a = TensorArchive::new();
    let d = config.d_model;
    let mut put = |a: &mut TensorArchive, name: String, shape: Vec<usize>, offset: f32| {
        let n: usize = shape.iter().product();
        let dist = if shape.len() > 1 { &wide } else { &narrow };
        let data = (0..n).map(|_| offset + dist.sample(&mut rng)).collect();
        a.insert(name, shape, data);
    };
    put(&mut a, "wte.weight".into(), vec![config.vocab_size, d], 0.0);
    put(&mut a, "wpe.weight".into(), vec![config.max_context, d], 0.0);
    for i in 0..config.n_layers {
        let p = format!("h.{i}");
        for ln in ["ln_1", "ln_2"] {
            put(&mut a, format!("{p}.{ln}.weight"), vec![d], 1.0);
            put(&mut a, format!("{p}.{ln}.bias"), vec![d], 0.0);
        }
        put(&mut a, format!("{p}.attn.c_attn.weight"), vec![d, 3 * d], 0.0);
        put(&mut a, format!("{p}.attn.c_attn.bias"), vec![3 * d], 0.0);
        put(&mut a, format!("{p}.attn.c_proj.weight"), vec![d, d], 0.0);
        put(&mut a, format!("{p}.attn.c_proj.bias"), vec![d], 0.0);
        put(&mut a, format!("{p}.mlp.c_fc.weight"), vec![d, 4 * d], 0.0);
        put(&mut a, format!("{p}.mlp.c_fc.bias"), vec![4 * d], 0.0);
        put(&mut a, format!("{p}.mlp.c_proj.weight"), vec![4 * d, d], 0.0);
        put(&mut a, format!("{p}.mlp.c_proj.bias"), vec![d], 0.0);
    }
    put(&mut a, "ln_f.weight".into(), vec![d], 1.0);
    put(&mut a, "ln_f.bias".into(), vec![d], 0.0);
    Model::from_archive(config, &a).expect("synthetic archive is well formed")
}

/// Byte-level vocabulary: the 256 byte symbols (ids in byte order), one
/// token per merge in order, then `<|endoftext|>`.
pub fn byte_vocabulary(merges: &[(&str, &str)]) -> Vocabulary {
    let mut id_of: HashMap<String, u32> = HashMap::new();
    for c in byte_to_unicode() {
        let next = id_of.len() as u32;
        id_of.insert(c.to_string(), next);
    }
    for (a, b) in merges {
        let next = id_of.len() as u32;
        id_of.entry(format!("{a}{b}")).or_insert(next);
    }
    let next = id_of.len() as u32;
    id_of.insert(END_OF_TEXT.to_string(), next);
    let merges = merges
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    Vocabulary::from_parts(id_of, merges).expect("synthetic vocabulary is consistent")
}

/// A handful of English merges, enough to give common words multi-byte tokens.
pub const ENGLISH_MERGES: &[(&str, &str)] = &[
    ("Ġ", "t"),
    ("h", "e"),
    ("Ġt", "he"),
    ("i", "n"),
    ("e", "d"),
    ("Ġ", "a"),
    ("Ġ", "s"),
    ("e", "r"),
    ("o", "n"),
    ("Ġ", "w"),
    ("a", "t"),
    ("r", "e"),
    ("Ġ", "b"),
    ("Ġ", "l"),
    ("Ġl", "a"),
    ("Ġla", "m"),
    ("Ġlam", "b"),
    ("Ġ", "g"),
    ("i", "r"),
    ("Ġg", "ir"),
    ("Ġgir", "l"),
];

/// Toy configuration sized for `byte_vocabulary(ENGLISH_MERGES)`.
pub fn toy_config(n_layers: usize) -> ModelConfig {
    ModelConfig {
        n_layers,
        d_model: 16,
        n_heads: 4,
        vocab_size: 256 + ENGLISH_MERGES.len() + 1,
        max_context: 64,
        ln_epsilon: 1e-5,
    }
}

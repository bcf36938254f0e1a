// SPDX-License-Identifier: MIT OR Apache-2.0

//! Model loading, tokenisation, forward pass and lens decoding.

mod archive;
mod config;
mod forward;
mod lens;
mod model;
mod tokenizer;

pub use archive::{NamedTensor, TensorArchive};
pub use config::ModelConfig;
pub use forward::{forward_collect, gelu_tanh, LayerStack};
pub use lens::{
    decode_layer, lens_distribution, softmax, LayerDistribution, LensTranslator, TranslatorSet,
};
pub use model::{load_model, Block, LayerNorm, Linear, Model};
pub use tokenizer::{byte_to_unicode, Vocabulary, END_OF_TEXT};

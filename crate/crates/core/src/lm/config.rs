// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyper-parameters of a GPT-2 style decoder.
///
/// The JSON keys are `n_layers`, `d_model`, `n_heads`, `vocab_size`,
/// `max_context` and `ln_epsilon`. The Hugging Face GPT-2 spellings
/// (`n_layer`, `n_embd`, `n_head`, `n_positions`, `layer_norm_epsilon`) are
/// accepted as aliases so a stock `config.json` loads unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(alias = "n_layer")]
    pub n_layers: usize,
    #[serde(alias = "n_embd")]
    pub d_model: usize,
    #[serde(alias = "n_head")]
    pub n_heads: usize,
    pub vocab_size: usize,
    #[serde(alias = "n_positions")]
    pub max_context: usize,
    #[serde(alias = "layer_norm_epsilon")]
    pub ln_epsilon: f64,
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ModelConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Zero blocks is allowed: such a model decodes straight from the
    /// embedding layer.
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.vocab_size == 0 || self.max_context == 0 {
            return Err(Error::InvalidConfig(
                "d_model, n_heads, vocab_size and max_context must be positive".into(),
            ));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(self.ln_epsilon.is_finite() && self.ln_epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ln_epsilon must be a positive finite number, got {}",
                self.ln_epsilon
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Number of decodable layers, counting the embedding layer.
    pub fn n_states(&self) -> usize {
        self.n_layers + 1
    }
}

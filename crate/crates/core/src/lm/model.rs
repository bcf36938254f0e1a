// SPDX-License-Identifier: MIT OR Apache-2.0

//! GPT-2 parameter layout.
//!
//! | tensor                      | shape            |
//! |-----------------------------|------------------|
//! | `wte.weight`                | `[vocab, d]`     |
//! | `wpe.weight`                | `[context, d]`   |
//! | `h.{i}.ln_1.{weight,bias}`  | `[d]`            |
//! | `h.{i}.attn.c_attn.weight`  | `[d, 3d]`        |
//! | `h.{i}.attn.c_attn.bias`    | `[3d]`           |
//! | `h.{i}.attn.c_proj.weight`  | `[d, d]`         |
//! | `h.{i}.attn.c_proj.bias`    | `[d]`            |
//! | `h.{i}.ln_2.{weight,bias}`  | `[d]`            |
//! | `h.{i}.mlp.c_fc.weight`     | `[d, inner]`     |
//! | `h.{i}.mlp.c_fc.bias`       | `[inner]`        |
//! | `h.{i}.mlp.c_proj.weight`   | `[inner, d]`     |
//! | `h.{i}.mlp.c_proj.bias`     | `[d]`            |
//! | `ln_f.{weight,bias}`        | `[d]`            |
//! | `lm_head.weight` (optional) | `[vocab, d]`     |
//!
//! Linear weights are stored input-major (`y = x W + b`). Without
//! `lm_head.weight` the unembedding is tied to `wte.weight`.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::archive::TensorArchive;
use super::config::ModelConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: Array1<f32>,
    pub bias: Array1<f32>,
    pub eps: f64,
}

impl LayerNorm {
    pub fn apply_row(&self, x: ArrayView1<'_, f32>) -> Array1<f32> {
        let n = x.len() as f64;
        let mean = x.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = x
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        let inv = 1.0 / (var + self.eps).sqrt();
        let mut out = Array1::zeros(x.len());
        for (j, o) in out.iter_mut().enumerate() {
            *o = (((x[j] as f64 - mean) * inv) as f32) * self.gain[j] + self.bias[j];
        }
        out
    }

    pub fn apply(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        let mut out = Array2::zeros(x.raw_dim());
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            out.row_mut(i).assign(&self.apply_row(row));
        }
        out
    }
}

/// An input-major affine map `y = x W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Array2<f32>,
    pub bias: Array1<f32>,
}

impl Linear {
    pub fn forward(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        x.dot(&self.weight) + &self.bias
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub ln_1: LayerNorm,
    pub attn_qkv: Linear,
    pub attn_out: Linear,
    pub ln_2: LayerNorm,
    pub mlp_in: Linear,
    pub mlp_out: Linear,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub token_embeddings: Array2<f32>,
    pub position_embeddings: Array2<f32>,
    pub blocks: Vec<Block>,
    pub final_layernorm: LayerNorm,
    /// `W_U`, `[vocab, d]`.
    pub unembedding: Array2<f32>,
    /// `W_U^T` widened to f64, `[d, vocab]`, used by the lens.
    unembedding_t: Array2<f64>,
}

/// Loads a model from a JSON config and a safetensors weight archive.
pub fn load_model(config_file: &Path, weights_file: &Path) -> Result<Model> {
    let config = ModelConfig::load(config_file)?;
    let archive = TensorArchive::read(weights_file)?;
    Model::from_archive(config, &archive)
}

impl Model {
    pub fn from_archive(config: ModelConfig, archive: &TensorArchive) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let v = config.vocab_size;
        let eps = config.ln_epsilon;
        let ln = |prefix: &str| -> Result<LayerNorm> {
            Ok(LayerNorm {
                gain: archive.vector(&format!("{prefix}.weight"), d)?,
                bias: archive.vector(&format!("{prefix}.bias"), d)?,
                eps,
            })
        };
        let linear = |prefix: &str, rows: usize, cols: usize| -> Result<Linear> {
            Ok(Linear {
                weight: archive.matrix(&format!("{prefix}.weight"), rows, cols)?,
                bias: archive.vector(&format!("{prefix}.bias"), cols)?,
            })
        };

        let token_embeddings = archive.matrix("wte.weight", v, d)?;
        let position_embeddings = archive.matrix("wpe.weight", config.max_context, d)?;
        let mut blocks = Vec::with_capacity(config.n_layers);
        for i in 0..config.n_layers {
            let p = format!("h.{i}");
            let fc_name = format!("{p}.mlp.c_fc.weight");
            let inner = match archive.get(&fc_name) {
                Some(t) if t.shape.len() == 2 && t.shape[0] == d && t.shape[1] > 0 => t.shape[1],
                Some(t) => {
                    return Err(Error::TensorShape {
                        name: fc_name,
                        expected: vec![d, 4 * d],
                        actual: t.shape.clone(),
                    })
                }
                None => return Err(Error::MissingTensor { name: fc_name }),
            };
            blocks.push(Block {
                ln_1: ln(&format!("{p}.ln_1"))?,
                attn_qkv: linear(&format!("{p}.attn.c_attn"), d, 3 * d)?,
                attn_out: linear(&format!("{p}.attn.c_proj"), d, d)?,
                ln_2: ln(&format!("{p}.ln_2"))?,
                mlp_in: linear(&format!("{p}.mlp.c_fc"), d, inner)?,
                mlp_out: linear(&format!("{p}.mlp.c_proj"), inner, d)?,
            });
        }
        let final_layernorm = ln("ln_f")?;
        let unembedding = if archive.contains("lm_head.weight") {
            archive.matrix("lm_head.weight", v, d)?
        } else {
            token_embeddings.clone()
        };
        let unembedding_t = unembedding.t().mapv(f64::from);
        Ok(Self {
            config,
            token_embeddings,
            position_embeddings,
            blocks,
            final_layernorm,
            unembedding,
            unembedding_t,
        })
    }

    /// Inverse of [`Model::from_archive`]; always writes an explicit `lm_head.weight`.
    pub fn to_archive(&self) -> TensorArchive {
        fn mat(a: &mut TensorArchive, name: String, m: &Array2<f32>) {
            a.insert(name, m.shape().to_vec(), m.iter().copied().collect());
        }
        fn vec(a: &mut TensorArchive, name: String, v: &Array1<f32>) {
            a.insert(name, vec![v.len()], v.to_vec());
        }
        let mut a = TensorArchive::new();
        mat(&mut a, "wte.weight".into(), &self.token_embeddings);
        mat(&mut a, "wpe.weight".into(), &self.position_embeddings);
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("h.{i}");
            vec(&mut a, format!("{p}.ln_1.weight"), &b.ln_1.gain);
            vec(&mut a, format!("{p}.ln_1.bias"), &b.ln_1.bias);
            mat(&mut a, format!("{p}.attn.c_attn.weight"), &b.attn_qkv.weight);
            vec(&mut a, format!("{p}.attn.c_attn.bias"), &b.attn_qkv.bias);
            mat(&mut a, format!("{p}.attn.c_proj.weight"), &b.attn_out.weight);
            vec(&mut a, format!("{p}.attn.c_proj.bias"), &b.attn_out.bias);
            vec(&mut a, format!("{p}.ln_2.weight"), &b.ln_2.gain);
            vec(&mut a, format!("{p}.ln_2.bias"), &b.ln_2.bias);
            mat(&mut a, format!("{p}.mlp.c_fc.weight"), &b.mlp_in.weight);
            vec(&mut a, format!("{p}.mlp.c_fc.bias"), &b.mlp_in.bias);
            mat(&mut a, format!("{p}.mlp.c_proj.weight"), &b.mlp_out.weight);
            vec(&mut a, format!("{p}.mlp.c_proj.bias"), &b.mlp_out.bias);
        }
        vec(&mut a, "ln_f.weight".into(), &self.final_layernorm.gain);
        vec(&mut a, "ln_f.bias".into(), &self.final_layernorm.bias);
        mat(&mut a, "lm_head.weight".into(), &self.unembedding);
        a
    }

    /// The model's own output head: `softmax(W_U · ln_f(h))` for one final
    /// hidden state, evaluated row by row in 64-bit.
    pub fn head_probs(&self, final_state: ArrayView1<'_, f32>) -> Vec<f64> {
        let z = self.final_layernorm.apply_row(final_state);
        let logits: Vec<f64> = self
            .unembedding
            .axis_iter(Axis(0))
            .map(|w| {
                w.iter()
                    .zip(z.iter())
                    .map(|(&a, &b)| a as f64 * b as f64)
                    .sum::<f64>()
            })
            .collect();
        super::lens::softmax(&logits)
    }

    pub(crate) fn unembedding_t(&self) -> &Array2<f64> {
        &self.unembedding_t
    }

    /// Next-token distributions at every position from the standard head.
    pub fn output_distributions(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>> {
        let stack = super::forward::forward_collect(self, ids)?;
        let last = stack.layer(self.config.n_layers);
        Ok(last.axis_iter(Axis(0)).map(|h| self.head_probs(h)).collect())
    }
}

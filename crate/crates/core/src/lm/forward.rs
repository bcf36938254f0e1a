// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-threaded GPT-2 forward pass that keeps every residual-stream state.

use ndarray::{s, Array2, ArrayView2};

use super::model::{Block, Model};
use crate::error::{Error, Result};

/// Residual-stream states: index 0 is the embedding output
/// (token + position embedding), index `l` the output of block `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    states: Vec<Array2<f32>>,
}

impl LayerStack {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn seq_len(&self) -> usize {
        self.states.first().map_or(0, |s| s.nrows())
    }

    /// `[seq_len, d_model]` state after `layer` blocks.
    pub fn layer(&self, layer: usize) -> ArrayView2<'_, f32> {
        self.states[layer].view()
    }

    pub fn states(&self) -> &[Array2<f32>] {
        &self.states
    }
}

pub fn forward_collect(model: &Model, ids: &[u32]) -> Result<LayerStack> {
    let cfg = &model.config;
    if ids.is_empty() {
        return Err(Error::EmptySequence);
    }
    if ids.len() > cfg.max_context {
        return Err(Error::ContextOverflow {
            len: ids.len(),
            max: cfg.max_context,
        });
    }
    let mut x = Array2::<f32>::zeros((ids.len(), cfg.d_model));
    for (pos, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= cfg.vocab_size {
            return Err(Error::IndexOutOfRange {
                what: "token id",
                index: id,
                bound: cfg.vocab_size,
            });
        }
        let row = &model.token_embeddings.row(id) + &model.position_embeddings.row(pos);
        x.row_mut(pos).assign(&row);
    }

    let mut states = Vec::with_capacity(cfg.n_layers + 1);
    states.push(x.clone());
    for block in &model.blocks {
        x = block_forward(block, x.view(), cfg.n_heads);
        states.push(x.clone());
    }
    Ok(LayerStack { states })
}

fn block_forward(block: &Block, x: ArrayView2<'_, f32>, n_heads: usize) -> Array2<f32> {
    let a = block.ln_1.apply(x);
    let attn = causal_self_attention(block, a.view(), n_heads);
    let h = &x + &attn;
    let m = block.ln_2.apply(h.view());
    let mut inner = block.mlp_in.forward(m.view());
    inner.mapv_inplace(gelu_tanh);
    let mlp = block.mlp_out.forward(inner.view());
    h + mlp
}

fn causal_self_attention(block: &Block, a: ArrayView2<'_, f32>, n_heads: usize) -> Array2<f32> {
    let (t, d) = a.dim();
    let hd = d / n_heads;
    let qkv = block.attn_qkv.forward(a);
    let scale = 1.0 / (hd as f32).sqrt();
    let mut merged = Array2::<f32>::zeros((t, d));
    let mut weights = vec![0f32; t];
    for head in 0..n_heads {
        let q = qkv.slice(s![.., head * hd..(head + 1) * hd]);
        let k = qkv.slice(s![.., d + head * hd..d + (head + 1) * hd]);
        let v = qkv.slice(s![.., 2 * d + head * hd..2 * d + (head + 1) * hd]);
        for i in 0..t {
            let qi = q.row(i);
            let mut max = f32::NEG_INFINITY;
            for j in 0..=i {
                let score = qi.dot(&k.row(j)) * scale;
                weights[j] = score;
                max = max.max(score);
            }
            let mut total = 0f32;
            for w in weights.iter_mut().take(i + 1) {
                *w = (*w - max).exp();
                total += *w;
            }
            let mut out = merged.slice_mut(s![i, head * hd..(head + 1) * hd]);
            for j in 0..=i {
                out.scaled_add(weights[j] / total, &v.row(j));
            }
        }
    }
    block.attn_out.forward(merged.view())
}

/// GELU, tanh approximation (GPT-2's `gelu_new`).
pub fn gelu_tanh(x: f32) -> f32 {
    const C: f32 = 0.797_884_56; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::ModelConfig;
    use crate::synthetic;

    fn cfg(n_layers: usize) -> ModelConfig {
        ModelConfig {
            n_layers,
            d_model: 8,
            n_heads: 2,
            vocab_size: 11,
            max_context: 6,
            ln_epsilon: 1e-5,
        }
    }

    #[test]
    fn zero_layer_model_is_embedding_plus_position() {
        let model = synthetic::random_model(cfg(0), 3);
        let stack = forward_collect(&model, &[7]).unwrap();
        assert_eq!(stack.n_states(), 1);
        assert_eq!(stack.layer(0).dim(), (1, 8));
        let expected = &model.token_embeddings.row(7) + &model.position_embeddings.row(0);
        assert_eq!(stack.layer(0).row(0), expected);
    }

    #[test]
    fn context_overflow_and_empty_input_are_errors() {
        let model = synthetic::random_model(cfg(1), 3);
        assert!(matches!(
            forward_collect(&model, &[1; 7]),
            Err(Error::ContextOverflow { len: 7, max: 6 })
        ));
        assert!(matches!(forward_collect(&model, &[]), Err(Error::EmptySequence)));
        assert!(matches!(
            forward_collect(&model, &[11]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn causal_prefix_states_do_not_see_the_future() {
        let model = synthetic::random_model(cfg(2), 9);
        let full = forward_collect(&model, &[1, 2, 3, 4]).unwrap();
        let prefix = forward_collect(&model, &[1, 2]).unwrap();
        for l in 0..3 {
            for p in 0..2 {
                for (a, b) in full.layer(l).row(p).iter().zip(prefix.layer(l).row(p)) {
                    assert!((a - b).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn model_is_shareable_across_threads() {
        fn check<T: Send + Sync>() {}
        check::<Model>();
        check::<LayerStack>();
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let model = synthetic::random_model(cfg(2), 5);
        let a = forward_collect(&model, &[3, 1, 4, 1, 5]).unwrap();
        let b = forward_collect(&model, &[3, 1, 4, 1, 5]).unwrap();
        assert_eq!(a, b);
    }
}

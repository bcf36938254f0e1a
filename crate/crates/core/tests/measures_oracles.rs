// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lens distributions and word measures against brute-force computations on
//! toy models and hand-built distributions.

use lsurp_core::lm::{decode_layer, forward_collect, softmax, LayerDistribution, Model};
use lsurp_core::measures::{
    encode_sentence, trailing_word_probability, word_surprisal, word_update_measures, SentenceLens,
    WordSpan,
};
use lsurp_core::synthetic::{byte_vocabulary, random_model, toy_config, ENGLISH_MERGES};

fn layer_norm(x: &[f64], gain: &[f32], bias: &[f32], eps: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    x.iter()
        .enumerate()
        .map(|(j, v)| (v - mean) / (var + eps).sqrt() * gain[j] as f64 + bias[j] as f64)
        .collect()
}

fn affine(x: &[f64], w: &ndarray::Array2<f32>, b: &ndarray::Array1<f32>) -> Vec<f64> {
    (0..w.ncols())
        .map(|o| b[o] as f64 + x.iter().enumerate().map(|(i, v)| v * w[[i, o]] as f64).sum::<f64>())
        .collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

/// Scalar f64 GPT-2 forward pass; returns the residual stream after the
/// embedding and after every block.
fn naive_forward(m: &Model, ids: &[u32]) -> Vec<Vec<Vec<f64>>> {
    let d = m.config.d_model;
    let heads = m.config.n_heads;
    let hd = d / heads;
    let mut x: Vec<Vec<f64>> = ids
        .iter()
        .enumerate()
        .map(|(p, &id)| {
            (0..d)
                .map(|j| m.token_embeddings[[id as usize, j]] as f64 + m.position_embeddings[[p, j]] as f64)
                .collect()
        })
        .collect();
    let mut states = vec![x.clone()];
    for b in &m.blocks {
        let eps = b.ln_1.eps;
        let qkv: Vec<Vec<f64>> = x
            .iter()
            .map(|r| affine(&layer_norm(r, b.ln_1.gain.as_slice().unwrap(), b.ln_1.bias.as_slice().unwrap(), eps), &b.attn_qkv.weight, &b.attn_qkv.bias))
            .collect();
        let t = x.len();
        let mut merged = vec![vec![0.0; d]; t];
        for h in 0..heads {
            for i in 0..t {
                let scores: Vec<f64> = (0..=i)
                    .map(|j| {
                        (0..hd).map(|c| qkv[i][h * hd + c] * qkv[j][d + h * hd + c]).sum::<f64>()
                            / (hd as f64).sqrt()
                    })
                    .collect();
                let w = softmax(&scores);
                for c in 0..hd {
                    merged[i][h * hd + c] = (0..=i).map(|j| w[j] * qkv[j][2 * d + h * hd + c]).sum();
                }
            }
        }
        for i in 0..t {
            let a = affine(&merged[i], &b.attn_out.weight, &b.attn_out.bias);
            let h: Vec<f64> = x[i].iter().zip(&a).map(|(u, v)| u + v).collect();
            let inner: Vec<f64> = affine(
                &layer_norm(&h, b.ln_2.gain.as_slice().unwrap(), b.ln_2.bias.as_slice().unwrap(), b.ln_2.eps),
                &b.mlp_in.weight,
                &b.mlp_in.bias,
            )
            .into_iter()
            .map(gelu)
            .collect();
            let out = affine(&inner, &b.mlp_out.weight, &b.mlp_out.bias);
            x[i] = h.iter().zip(&out).map(|(u, v)| u + v).collect();
        }
        states.push(x.clone());
    }
    states
}

fn naive_lens(m: &Model, h: &[f64]) -> Vec<f64> {
    let z = layer_norm(
        h,
        m.final_layernorm.gain.as_slice().unwrap(),
        m.final_layernorm.bias.as_slice().unwrap(),
        m.final_layernorm.eps,
    );
    let logits: Vec<f64> = m
        .unembedding
        .rows()
        .into_iter()
        .map(|w| w.iter().zip(&z).map(|(a, b)| *a as f64 * b).sum())
        .collect();
    softmax(&logits)
}

#[test]
fn forward_pass_matches_scalar_oracle() {
    let m = random_model(toy_config(2), 3);
    let ids: Vec<u32> = vec![277, 5, 100, 42, 260, 7, 8, 199, 33];
    let stack = forward_collect(&m, &ids).unwrap();
    let oracle = naive_forward(&m, &ids);
    assert_eq!(stack.n_states(), 3);
    for (l, layer) in oracle.iter().enumerate() {
        for (p, row) in layer.iter().enumerate() {
            for (a, b) in stack.layer(l).row(p).iter().zip(row) {
                assert!((*a as f64 - b).abs() <= 1e-4, "layer {l} pos {p}");
            }
        }
    }
}

#[test]
fn every_layer_lens_matches_scalar_oracle() {
    let m = random_model(toy_config(2), 5);
    let ids: Vec<u32> = vec![277, 40, 41, 260, 100];
    let stack = forward_collect(&m, &ids).unwrap();
    let oracle = naive_forward(&m, &ids);
    for l in 0..=2 {
        let dists = decode_layer(&m, &stack, l, None).unwrap();
        for (p, d) in dists.iter().enumerate() {
            let expect = naive_lens(&m, &oracle[l][p]);
            for (a, b) in d.probs.iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-5, "layer {l} pos {p}");
            }
        }
    }
}

#[test]
fn layer_zero_lens_needs_only_embeddings() {
    let m = random_model(toy_config(2), 9);
    let ids: Vec<u32> = vec![277, 12, 90];
    let stack = forward_collect(&m, &ids).unwrap();
    let dists = decode_layer(&m, &stack, 0, None).unwrap();
    for (p, &id) in ids.iter().enumerate() {
        let h: Vec<f64> = (0..m.config.d_model)
            .map(|j| m.token_embeddings[[id as usize, j]] as f64 + m.position_embeddings[[p, j]] as f64)
            .collect();
        for (a, b) in dists[p].probs.iter().zip(naive_lens(&m, &h)) {
            assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn last_layer_word_surprisal_is_model_surprisal_by_chain_rule() {
    let m = random_model(toy_config(2), 21);
    let vocab = byte_vocabulary(ENGLISH_MERGES);
    let words = ["The", "girl", "fed", "the", "lamb", "warily."];
    let (ids, spans) = encode_sentence(&vocab, &words).unwrap();
    let mut lens = SentenceLens::new(&m, ids.clone(), None).unwrap();
    for span in &spans {
        let got = lens.word_surprisal(span, 2).unwrap().surprisal_nats;
        // Re-run the model on each prefix alone: no shared state, no caching.
        let mut expect = 0.0;
        for (j, &tok) in span.token_ids.iter().enumerate() {
            let prefix = &ids[..span.start_pos + j];
            let head = m.output_distributions(prefix).unwrap();
            expect -= head.last().unwrap()[tok as usize].ln();
        }
        assert!((got - expect).abs() <= 1e-6 * expect.max(1.0), "{}", span.word_text);
    }
}

#[test]
fn surprisal_update_is_log_ratio_of_word_probabilities() {
    let m = random_model(toy_config(3), 4);
    let vocab = byte_vocabulary(ENGLISH_MERGES);
    let (ids, spans) = encode_sentence(&vocab, &["We", "saw", "the", "girl"]).unwrap();
    let stack = forward_collect(&m, &ids).unwrap();
    let p = decode_layer(&m, &stack, 1, None).unwrap();
    let q = decode_layer(&m, &stack, 3, None).unwrap();
    for span in &spans {
        let prob = |d: &[LayerDistribution]| -> f64 {
            span.token_ids
                .iter()
                .enumerate()
                .map(|(j, &t)| d[span.start_pos + j - 1].probs[t as usize])
                .product()
        };
        let r = word_update_measures(&p, &q, &ids, span).unwrap();
        assert!((r.su - (prob(&q) / prob(&p)).ln()).abs() <= 1e-9);
        assert!(r.kl >= 0.0 && r.js >= 0.0);
        assert!(r.js <= span.token_ids.len() as f64 * std::f64::consts::LN_2);
    }
}

/// Hand-built distributions over the tokens `A`, `ĠB`, `ĠC` and end-of-text,
/// generated by a first-order Markov chain.
struct Chain {
    ids: [u32; 4],
    table: [[f64; 4]; 4],
    size: usize,
}

impl Chain {
    fn dists(&self, seq: &[usize]) -> Vec<LayerDistribution> {
        seq.iter()
            .enumerate()
            .map(|(pos, &s)| {
                let mut probs = vec![0.0; self.size];
                for (k, &id) in self.ids.iter().enumerate() {
                    probs[id as usize] = self.table[s][k];
                }
                LayerDistribution { layer: 0, position: pos, probs }
            })
            .collect()
    }
}

#[test]
fn trailing_probabilities_of_all_next_words_sum_with_sentence_end_to_one() {
    let vocab = byte_vocabulary(&[("Ġ", "B"), ("Ġ", "C")]);
    let id = |t: &str| vocab.id_of(t).unwrap();
    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;
    const E: usize = 3;
    let chain = Chain {
        ids: [id("A"), id("ĠB"), id("ĠC"), vocab.end_of_text().unwrap()],
        table: [
            [0.45, 0.25, 0.2, 0.1],
            [0.6, 0.1, 0.2, 0.1],
            [0.3, 0.3, 0.3, 0.1],
            [0.5, 0.3, 0.15, 0.05],
        ],
        size: vocab.len(),
    };
    let boundary = vocab.boundary_mask();
    // Context: end-of-text, then the word `ĠB` is complete.
    let ctx = [E, B];
    let mut total = 0.0;
    for first in [B, C] {
        for k in 0..200 {
            let mut seq = ctx.to_vec();
            seq.push(first);
            seq.extend(std::iter::repeat_n(A, k));
            let ids: Vec<u32> = seq.iter().map(|&s| chain.ids[s]).collect();
            let span = WordSpan {
                word_text: String::new(),
                token_ids: ids[ctx.len()..].to_vec(),
                start_pos: ctx.len(),
            };
            let dists = chain.dists(&seq);
            total += trailing_word_probability(&dists, &ids, &span, &vocab, &boundary).unwrap();
            assert!(total <= 1.0 + 1e-12);
        }
    }
    let t = chain.table[B];
    let sentence_end = t[E] / (t[B] + t[C] + t[E]);
    assert!((total + sentence_end - 1.0).abs() <= 1e-9, "{total} + {sentence_end}");
}

#[test]
fn sentence_initial_word_is_not_divided_by_boundary_mass() {
    let vocab = byte_vocabulary(&[("Ġ", "B"), ("Ġ", "C")]);
    let id = |t: &str| vocab.id_of(t).unwrap();
    let chain = Chain {
        ids: [id("A"), id("ĠB"), id("ĠC"), vocab.end_of_text().unwrap()],
        table: [[0.5, 0.2, 0.2, 0.1]; 4],
        size: vocab.len(),
    };
    let seq = [3, 0, 0];
    let ids: Vec<u32> = seq.iter().map(|&s| chain.ids[s]).collect();
    let span = WordSpan { word_text: "AA".into(), token_ids: ids[1..].to_vec(), start_pos: 1 };
    let dists = chain.dists(&seq);
    let p = trailing_word_probability(&dists, &ids, &span, &vocab, &vocab.boundary_mask()).unwrap();
    assert!((p - 0.5 * 0.5 * 0.5).abs() <= 1e-15);
    let lead = word_surprisal(&dists, &ids, &span).unwrap().surprisal_nats;
    assert!((lead - 2.0 * 2f64.ln()).abs() <= 1e-12);
}

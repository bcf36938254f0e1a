// SPDX-License-Identifier: MIT OR Apache-2.0

//! Word-level surprisal and shallow-vs-deep probability-update measures.
//!
//! All quantities are in nats. Probabilities are floored at [`PROB_FLOOR`]
//! before any logarithm or ratio. Divergence sums run left to right over the
//! vocabulary so results do not depend on scheduling.
//!
//! A word's KL and JS are the *sums* of the position-wise divergences over
//! its subword positions, mirroring how multi-token surprisal is summed. The
//! sum has no chain-rule justification for divergences; it is a convention.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{
    decode_layer, forward_collect, LayerDistribution, LayerStack, Model, TranslatorSet, Vocabulary,
};

pub const PROB_FLOOR: f64 = 1e-12;

/// A word's subword tokens and where they sit in the sentence token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSpan {
    pub word_text: String,
    pub token_ids: Vec<u32>,
    pub start_pos: usize,
}

impl WordSpan {
    pub fn end_pos(&self) -> usize {
        self.start_pos + self.token_ids.len()
    }
}

/// Tokenises a sentence word by word behind an end-of-text token.
///
/// Words after the first carry a leading space, so every span detokenises to
/// its own surface form and spans tile the sequence after position 0.
pub fn encode_sentence<S: AsRef<str>>(
    vocab: &Vocabulary,
    words: &[S],
) -> Result<(Vec<u32>, Vec<WordSpan>)> {
    let bos = vocab.end_of_text().ok_or_else(|| {
        Error::Tokenizer("vocabulary has no end-of-text token to open a sentence".into())
    })?;
    let mut ids = vec![bos];
    let mut spans = Vec::with_capacity(words.len());
    for (i, w) in words.iter().enumerate() {
        let text = if i == 0 {
            w.as_ref().to_string()
        } else {
            format!(" {}", w.as_ref())
        };
        let token_ids = vocab.tokenize(&text);
        if token_ids.is_empty() {
            return Err(Error::Tokenizer(format!("word {} is empty", i + 1)));
        }
        spans.push(WordSpan {
            word_text: text,
            start_pos: ids.len(),
            token_ids: token_ids.clone(),
        });
        ids.extend(token_ids);
    }
    Ok((ids, spans))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoding {
    Leading,
    #[default]
    Trailing,
}

impl FromStr for Decoding {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "leading" => Ok(Decoding::Leading),
            "trailing" => Ok(Decoding::Trailing),
            other => Err(format!("unknown decoding `{other}` (leading|trailing)")),
        }
    }
}

impl fmt::Display for Decoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decoding::Leading => "leading",
            Decoding::Trailing => "trailing",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurprisalRecord {
    pub layer: usize,
    pub start_pos: usize,
    pub surprisal_nats: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub su: f64,
    pub kl: f64,
    pub js: f64,
}

fn check_span(dists: &[LayerDistribution], ids: &[u32], span: &WordSpan) -> Result<()> {
    if span.token_ids.is_empty() {
        return Err(Error::Alignment(format!("`{}` has no tokens", span.word_text)));
    }
    if span.start_pos == 0 {
        return Err(Error::Alignment(format!(
            "`{}` starts at position 0 and has no preceding context",
            span.word_text
        )));
    }
    if span.end_pos() > ids.len() || ids[span.start_pos..span.end_pos()] != span.token_ids[..] {
        return Err(Error::Alignment(format!(
            "`{}` tokens {:?} not found at position {}",
            span.word_text, span.token_ids, span.start_pos
        )));
    }
    if dists.len() < ids.len() {
        return Err(Error::Alignment(format!(
            "{} distributions for {} tokens",
            dists.len(),
            ids.len()
        )));
    }
    Ok(())
}

fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// Σ_j −ln P(subword_j | prefix), each conditional read from the distribution
/// at the position before the subword. `dists` holds one layer, all positions.
pub fn word_surprisal(
    dists: &[LayerDistribution],
    ids: &[u32],
    span: &WordSpan,
) -> Result<SurprisalRecord> {
    check_span(dists, ids, span)?;
    let surprisal = span
        .token_ids
        .iter()
        .enumerate()
        .map(|(j, &tok)| -floored_ln(dists[span.start_pos + j - 1].prob(tok)))
        .sum::<f64>();
    Ok(SurprisalRecord {
        layer: dists[0].layer,
        start_pos: span.start_pos,
        surprisal_nats: surprisal.max(0.0),
    })
}

/// Probability mass of word-opening tokens (see [`Vocabulary::boundary_mask`]).
pub fn boundary_mass(dist: &LayerDistribution, mask: &[bool]) -> f64 {
    dist.probs
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(p, _)| p)
        .sum()
}

/// Moves the word boundary from before the word to after it.
///
/// `b_before` is `Some` when the word's first subword carries the whitespace
/// marker, i.e. its leading probability already paid for the preceding
/// boundary; sentence-initial words without a marker pass `None`.
pub fn trailing_correction(p_lead: f64, b_after: f64, b_before: Option<f64>) -> Result<f64> {
    let mut p = p_lead * b_after;
    if let Some(b) = b_before {
        if !(b > 0.0) {
            return Err(Error::DegenerateBoundary);
        }
        p /= b;
    }
    Ok(p.clamp(PROB_FLOOR, 1.0))
}

/// Whitespace-trailing word probability `P_lead · B(ctx ⊕ word) / B(ctx)`.
pub fn trailing_word_probability(
    dists: &[LayerDistribution],
    ids: &[u32],
    span: &WordSpan,
    vocab: &Vocabulary,
    boundary: &[bool],
) -> Result<f64> {
    let lead = word_surprisal(dists, ids, span)?;
    let p_lead = (-lead.surprisal_nats).exp();
    let b_after = boundary_mass(&dists[span.end_pos() - 1], boundary);
    let b_before = vocab
        .starts_with_whitespace(span.token_ids[0])
        .then(|| boundary_mass(&dists[span.start_pos - 1], boundary));
    trailing_correction(p_lead, b_after, b_before)
}

/// Word surprisal under the chosen decoding.
pub fn decoded_word_surprisal(
    decoding: Decoding,
    dists: &[LayerDistribution],
    ids: &[u32],
    span: &WordSpan,
    vocab: &Vocabulary,
    boundary: &[bool],
) -> Result<f64> {
    match decoding {
        Decoding::Leading => Ok(word_surprisal(dists, ids, span)?.surprisal_nats),
        Decoding::Trailing => {
            let p = trailing_word_probability(dists, ids, span, vocab, boundary)?;
            Ok(-p.ln())
        }
    }
}

/// `s_shallow − s_deep`, i.e. `ln(Q(w) / P(w))`.
pub fn surprisal_update(s_shallow: f64, s_deep: f64) -> f64 {
    s_shallow - s_deep
}

/// Standardises to mean 0 and population standard deviation 1.
pub fn z_normalize(series: &[f64]) -> Result<Vec<f64>> {
    let (mean, std) = mean_and_std(series)?;
    Ok(series.iter().map(|x| (x - mean) / std).collect())
}

/// Population mean and standard deviation, two-pass.
pub fn mean_and_std(series: &[f64]) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::DegenerateSeries(format!(
            "need at least 2 values, got {}",
            series.len()
        )));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    Ok((mean, std))
}

fn check_pair(q: &[f64], p: &[f64]) -> Result<()> {
    if q.len() != p.len() {
        return Err(Error::ShapeMismatch(format!(
            "distributions of length {} and {}",
            q.len(),
            p.len()
        )));
    }
    Ok(())
}

/// KL(Q‖P) with `0·ln(0/·) = 0`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64> {
    check_pair(q, p)?;
    let mut total = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi > 0.0 {
            total += qi * (floored_ln(qi) - floored_ln(pi));
        }
    }
    Ok(total.max(0.0))
}

/// Jensen–Shannon divergence, bounded by ln 2.
pub fn js_divergence(q: &[f64], p: &[f64]) -> Result<f64> {
    check_pair(q, p)?;
    let mut total = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        // ln m = ln(q + p) − ln 2, which stays finite where (q + p) / 2 underflows.
        let ln_m = (qi + pi).ln() - std::f64::consts::LN_2;
        if qi > 0.0 {
            total += 0.5 * qi * (qi.ln() - ln_m);
        }
        if pi > 0.0 {
            total += 0.5 * pi * (pi.ln() - ln_m);
        }
    }
    Ok(total.clamp(0.0, std::f64::consts::LN_2))
}

/// SU, KL(Q‖P) and JS for one word. `shallow` (P) and `deep` (Q) hold all
/// positions of their layers. `su` here is the raw surprisal difference under
/// leading decoding; pipelines that decode differently compute it themselves.
pub fn word_update_measures(
    shallow: &[LayerDistribution],
    deep: &[LayerDistribution],
    ids: &[u32],
    span: &WordSpan,
) -> Result<UpdateRecord> {
    let s_shallow = word_surprisal(shallow, ids, span)?.surprisal_nats;
    let s_deep = word_surprisal(deep, ids, span)?.surprisal_nats;
    let mut kl = 0.0;
    let mut js = 0.0;
    for pos in span.start_pos - 1..span.end_pos() - 1 {
        kl += kl_divergence(&deep[pos].probs, &shallow[pos].probs)?;
        js += js_divergence(&deep[pos].probs, &shallow[pos].probs)?;
    }
    Ok(UpdateRecord {
        su: surprisal_update(s_shallow, s_deep),
        kl,
        js,
    })
}

/// One sentence run through the model, with per-layer distributions decoded
/// lazily and cached.
pub struct SentenceLens<'m> {
    model: &'m Model,
    translators: Option<&'m TranslatorSet>,
    ids: Vec<u32>,
    stack: LayerStack,
    cache: HashMap<usize, Vec<LayerDistribution>>,
}

impl<'m> SentenceLens<'m> {
    pub fn new(
        model: &'m Model,
        ids: Vec<u32>,
        translators: Option<&'m TranslatorSet>,
    ) -> Result<Self> {
        let stack = forward_collect(model, &ids)?;
        Ok(Self {
            model,
            translators,
            ids,
            stack,
            cache: HashMap::new(),
        })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn stack(&self) -> &LayerStack {
        &self.stack
    }

    pub fn layer(&mut self, layer: usize) -> Result<&[LayerDistribution]> {
        if !self.cache.contains_key(&layer) {
            let t = self.translators.and_then(|s| s.get(layer));
            let d = decode_layer(self.model, &self.stack, layer, t)?;
            self.cache.insert(layer, d);
        }
        Ok(&self.cache[&layer])
    }

    /// Drops cached distributions except for `keep`.
    pub fn retain_layers(&mut self, keep: &[usize]) {
        self.cache.retain(|l, _| keep.contains(l));
    }

    pub fn word_surprisal(&mut self, span: &WordSpan, layer: usize) -> Result<SurprisalRecord> {
        self.layer(layer)?;
        word_surprisal(&self.cache[&layer], &self.ids, span)
    }

    pub fn trailing_word_probability(
        &mut self,
        span: &WordSpan,
        layer: usize,
        vocab: &Vocabulary,
        boundary: &[bool],
    ) -> Result<f64> {
        self.layer(layer)?;
        trailing_word_probability(&self.cache[&layer], &self.ids, span, vocab, boundary)
    }

    pub fn word_update_measures(
        &mut self,
        span: &WordSpan,
        shallow_layer: usize,
        deep_layer: usize,
    ) -> Result<UpdateRecord> {
        self.layer(shallow_layer)?;
        self.layer(deep_layer)?;
        word_update_measures(
            &self.cache[&shallow_layer],
            &self.cache[&deep_layer],
            &self.ids,
            span,
        )
    }
}

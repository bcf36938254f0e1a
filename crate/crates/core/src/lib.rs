// SPDX-License-Identifier: MIT OR Apache-2.0

//! Layer-wise surprisal from decoder-only transformers and its relation to
//! human reading times.
//!
//! * [`lm`]: GPT-2 loading, forward pass, tokenizer and logit/tuned lens.
//! * [`measures`]: word surprisal, whitespace-trailing decoding, SU, KL, JS.
//! * [`dataset`]: annotated reading-time corpora and the frequency lexicon.
//! * [`stats`]: predictor design, OLS, likelihood-ratio tests, correlation.
//! * [`extract`]: per-sentence measure extraction over a corpus.
//! * [`experiments`]: the three analyses and their report files.

pub mod error;
pub mod io;
pub mod lm;
pub mod measures;
pub mod synthetic;
pub mod dataset;
pub mod stats;
pub mod extract;
pub mod experiments;
pub mod report;

pub use error::{Error, ErrorCategory, Result};

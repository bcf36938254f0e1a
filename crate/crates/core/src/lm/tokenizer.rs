// SPDX-License-Identifier: MIT OR Apache-2.0

//! GPT-2 byte-level BPE.
//!
//! Text is split with the GPT-2 pre-tokenisation pattern, every byte is
//! mapped to a printable code point, and merges are applied greedily by rank
//! within each pre-token. Every byte has its own symbol, so tokenisation is
//! total and `detokenize(tokenize(t)) == t` for any UTF-8 input.

use std::collections::HashMap;
use std::path::Path;

use fancy_regex::Regex;

use crate::error::{Error, Result};

const PRETOKENIZE: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

pub const END_OF_TEXT: &str = "<|endoftext|>";

/// GPT-2's reversible byte → code point table.
pub fn byte_to_unicode() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut next = 256u32;
    for b in 0..=255u8 {
        let printable = (b'!'..=b'~').contains(&b) || (0xA1..=0xAC).contains(&b) || b >= 0xAE;
        table[b as usize] = if printable {
            char::from(b)
        } else {
            let c = char::from_u32(next).expect("valid code point");
            next += 1;
            c
        };
    }
    table
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    id_of: HashMap<String, u32>,
    token_of: Vec<String>,
    merges: Vec<(String, String)>,
    merge_rank: HashMap<(String, String), usize>,
    byte_encoder: [char; 256],
    byte_decoder: HashMap<char, u8>,
    end_of_text: Option<u32>,
    pretokenizer: Regex,
}

impl Vocabulary {
    /// Reads a GPT-2 style `vocab.json` (token → id) and `merges.txt`.
    pub fn from_files(vocab_json: &Path, merges_txt: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(vocab_json).map_err(|e| Error::io(vocab_json, e))?;
        let id_of: HashMap<String, u32> =
            serde_json::from_str(&text).map_err(|e| Error::json(vocab_json, e))?;
        let merges_text =
            std::fs::read_to_string(merges_txt).map_err(|e| Error::io(merges_txt, e))?;
        let merges = parse_merges(&merges_text)?;
        Self::from_parts(id_of, merges)
    }

    pub fn from_parts(id_of: HashMap<String, u32>, merges: Vec<(String, String)>) -> Result<Self> {
        let n = id_of.len();
        let mut token_of = vec![None; n];
        for (tok, &id) in &id_of {
            let slot = token_of.get_mut(id as usize).ok_or_else(|| {
                Error::Tokenizer(format!("id {id} of `{tok}` is outside the dense range 0..{n}"))
            })?;
            if slot.is_some() {
                return Err(Error::Tokenizer(format!("id {id} assigned twice")));
            }
            *slot = Some(tok.clone());
        }
        let token_of: Vec<String> = token_of.into_iter().map(|t| t.expect("dense")).collect();

        let byte_encoder = byte_to_unicode();
        for (b, c) in byte_encoder.iter().enumerate() {
            if !id_of.contains_key(&c.to_string()) {
                return Err(Error::Tokenizer(format!(
                    "vocabulary lacks the symbol for byte 0x{b:02x}"
                )));
            }
        }
        let byte_decoder = byte_encoder
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();

        let mut merge_rank = HashMap::with_capacity(merges.len());
        for (rank, (a, b)) in merges.iter().enumerate() {
            let merged = format!("{a}{b}");
            if !id_of.contains_key(&merged) {
                return Err(Error::Tokenizer(format!(
                    "merge `{a} {b}` produces `{merged}`, which is not in the vocabulary"
                )));
            }
            merge_rank.entry((a.clone(), b.clone())).or_insert(rank);
        }

        let end_of_text = id_of.get(END_OF_TEXT).copied();
        Ok(Self {
            id_of,
            token_of,
            merges,
            merge_rank,
            byte_encoder,
            byte_decoder,
            end_of_text,
            pretokenizer: Regex::new(PRETOKENIZE).expect("static pattern"),
        })
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.token_of.get(id as usize).map(String::as_str)
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn end_of_text(&self) -> Option<u32> {
        self.end_of_text
    }

    /// Byte-level image of the space character (`Ġ`).
    pub fn whitespace_marker(&self) -> char {
        self.byte_encoder[b' ' as usize]
    }

    pub fn starts_with_whitespace(&self, id: u32) -> bool {
        let marker = self.whitespace_marker();
        self.token_of(id)
            .is_some_and(|t| t.starts_with(marker))
    }

    /// Tokens that open a new word: whitespace-initial tokens plus end-of-text.
    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len() as u32)
            .map(|id| self.starts_with_whitespace(id) || Some(id) == self.end_of_text)
            .collect()
    }

    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for m in self.pretokenizer.find_iter(text) {
            let piece = m.expect("pattern has no catastrophic backtracking").as_str();
            self.bpe_piece(piece, &mut ids);
        }
        ids
    }

    fn bpe_piece(&self, piece: &str, out: &mut Vec<u32>) {
        let mut symbols: Vec<String> = piece
            .bytes()
            .map(|b| self.byte_encoder[b as usize].to_string())
            .collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.merge_rank
                        .get(&(w[0].clone(), w[1].clone()))
                        .map(|&r| (r, i))
                })
                .min();
            let Some((_, first)) = best else { break };
            let (a, b) = (symbols[first].clone(), symbols[first + 1].clone());
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == a && symbols[i + 1] == b {
                    merged.push(format!("{a}{b}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        out.extend(symbols.iter().map(|s| self.id_of[s]));
    }

    pub fn detokenize_bytes(&self, ids: &[u32]) -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        for &id in ids {
            let tok = self.token_of(id).ok_or(Error::IndexOutOfRange {
                what: "token id",
                index: id as usize,
                bound: self.len(),
            })?;
            if Some(id) == self.end_of_text {
                bytes.extend_from_slice(tok.as_bytes());
                continue;
            }
            for c in tok.chars() {
                let b = self.byte_decoder.get(&c).ok_or_else(|| {
                    Error::Tokenizer(format!("token `{tok}` contains non byte-level char {c:?}"))
                })?;
                bytes.push(*b);
            }
        }
        Ok(bytes)
    }

    /// Decodes ids back to text; fails if the bytes are not valid UTF-8.
    pub fn detokenize(&self, ids: &[u32]) -> Result<String> {
        String::from_utf8(self.detokenize_bytes(ids)?)
            .map_err(|e| Error::Tokenizer(format!("decoded bytes are not UTF-8: {e}")))
    }

    /// Writes `vocab.json` and `merges.txt` in the GPT-2 format.
    pub fn write_files(&self, vocab_json: &Path, merges_txt: &Path) -> Result<()> {
        let ordered: std::collections::BTreeMap<u32, &str> = self
            .token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (i as u32, t.as_str()))
            .collect();
        let mut json = String::from("{");
        for (n, (id, tok)) in ordered.iter().enumerate() {
            if n > 0 {
                json.push(',');
            }
            json.push_str(&serde_json::to_string(tok).expect("string"));
            json.push_str(&format!(": {id}"));
        }
        json.push('}');
        crate::io::write_atomic(vocab_json, json.as_bytes())?;
        let mut merges = String::from("#version: 0.2\n");
        for (a, b) in &self.merges {
            merges.push_str(&format!("{a} {b}\n"));
        }
        crate::io::write_atomic(merges_txt, merges.as_bytes())
    }
}

fn parse_merges(text: &str) -> Result<Vec<(String, String)>> {
    let mut merges = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with("#version") || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                merges.push((a.to_string(), b.to_string()))
            }
            _ => {
                return Err(Error::Tokenizer(format!(
                    "merges line {}: expected two space-separated symbols",
                    n + 1
                )))
            }
        }
    }
    Ok(merges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use proptest::prelude::*;

    #[test]
    fn byte_table_is_a_bijection() {
        let t = byte_to_unicode();
        let distinct: std::collections::HashSet<char> = t.iter().copied().collect();
        assert_eq!(distinct.len(), 256);
        assert_eq!(t[b' ' as usize], 'Ġ');
        assert_eq!(t[b'\n' as usize], 'Ċ');
        assert_eq!(t[b'A' as usize], 'A');
    }

    #[test]
    fn empty_text_has_no_tokens() {
        let v = synthetic::byte_vocabulary(&[]);
        assert!(v.tokenize("").is_empty());
    }

    #[test]
    fn merges_apply_by_rank() {
        let v = synthetic::byte_vocabulary(&[("Ġ", "t"), ("h", "e"), ("Ġt", "he")]);
        let ids = v.tokenize(" the the");
        let toks: Vec<&str> = ids.iter().map(|&i| v.token_of(i).unwrap()).collect();
        assert_eq!(toks, ["Ġthe", "Ġthe"]);
        assert!(v.starts_with_whitespace(ids[0]));
    }

    #[test]
    fn rejects_merge_outside_vocab() {
        let v = synthetic::byte_vocabulary(&[]);
        let ids: HashMap<String, u32> = (0..v.len() as u32)
            .map(|i| (v.token_of(i).unwrap().to_string(), i))
            .collect();
        let err = Vocabulary::from_parts(ids, vec![("a".into(), "b".into())]);
        assert!(matches!(err, Err(Error::Tokenizer(_))));
    }

    #[test]
    fn boundary_mask_marks_space_tokens_and_eot() {
        let v = synthetic::byte_vocabulary(&[("Ġ", "t")]);
        let mask = v.boundary_mask();
        assert!(mask[v.id_of("Ġ").unwrap() as usize]);
        assert!(mask[v.id_of("Ġt").unwrap() as usize]);
        assert!(mask[v.end_of_text().unwrap() as usize]);
        assert!(!mask[v.id_of("t").unwrap() as usize]);
    }

    proptest! {
        #[test]
        fn roundtrip_arbitrary_utf8(text in any::<String>()) {
            let v = synthetic::byte_vocabulary(&[("Ġ", "t"), ("h", "e"), ("Ġt", "he"), ("i", "n")]);
            let ids = v.tokenize(&text);
            prop_assert_eq!(v.detokenize(&ids).unwrap(), text);
        }
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Garden-path reading-time corpora in a flat per-word CSV layout.
//!
//! ```text
//! item_id,phenomenon,condition,word_index,word_text,rt_ms,is_disambiguating
//! 1,MVRR,+,1,The,312.5,0
//! ```
//!
//! `condition` is `+` (ambiguous), `-` (unambiguous) or `filler`. An optional
//! `participant_id` column switches to raw mode: rows are averaged per
//! `(item, condition, word)` with an arithmetic mean. Empty `rt_ms` marks a
//! word without a reading time. Rows of the `Agreement` subset are skipped.

mod lexicon;

pub use lexicon::FrequencyLexicon;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phenomenon {
    #[serde(rename = "MVRR")]
    Mvrr,
    #[serde(rename = "NPS")]
    Nps,
    #[serde(rename = "NPZ")]
    Npz,
    #[serde(rename = "RC")]
    Rc,
    Attachment,
}

impl Phenomenon {
    pub const ALL: [Phenomenon; 5] = [
        Phenomenon::Mvrr,
        Phenomenon::Nps,
        Phenomenon::Npz,
        Phenomenon::Rc,
        Phenomenon::Attachment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phenomenon::Mvrr => "MVRR",
            Phenomenon::Nps => "NPS",
            Phenomenon::Npz => "NPZ",
            Phenomenon::Rc => "RC",
            Phenomenon::Attachment => "Attachment",
        }
    }
}

impl fmt::Display for Phenomenon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phenomenon {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Phenomenon::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown phenomenon `{s}`"))
    }
}

/// Which sentence of a pair, or a filler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "+")]
    Ambiguous,
    #[serde(rename = "-")]
    Unambiguous,
    #[serde(rename = "filler")]
    Filler,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Ambiguous => "+",
            Condition::Unambiguous => "-",
            Condition::Filler => "filler",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "+" => Ok(Condition::Ambiguous),
            "-" => Ok(Condition::Unambiguous),
            f if f.eq_ignore_ascii_case("filler") => Ok(Condition::Filler),
            other => Err(format!("unknown condition `{other}` (+|-|filler)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ambiguity {
    #[serde(rename = "D+")]
    Ambiguous,
    #[serde(rename = "D-")]
    Unambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "RoI")]
    Roi,
    #[serde(rename = "nonRoI")]
    NonRoi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConditionKey {
    pub ambiguity: Ambiguity,
    pub region: Region,
}

impl ConditionKey {
    pub const ALL: [ConditionKey; 4] = [
        ConditionKey::new(Ambiguity::Ambiguous, Region::Roi),
        ConditionKey::new(Ambiguity::Ambiguous, Region::NonRoi),
        ConditionKey::new(Ambiguity::Unambiguous, Region::Roi),
        ConditionKey::new(Ambiguity::Unambiguous, Region::NonRoi),
    ];

    pub const fn new(ambiguity: Ambiguity, region: Region) -> Self {
        Self { ambiguity, region }
    }
}

impl fmt::Display for ConditionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.ambiguity {
            Ambiguity::Ambiguous => "D+",
            Ambiguity::Unambiguous => "D-",
        };
        let r = match self.region {
            Region::Roi => "RoI",
            Region::NonRoi => "nonRoI",
        };
        write!(f, "{a}_{r}")
    }
}

impl FromStr for ConditionKey {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ConditionKey::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown condition key `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedWord {
    /// 1-based position within the sentence.
    pub word_index: usize,
    pub text: String,
    pub rt_ms: Option<f64>,
    pub is_disambiguating: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub item_id: String,
    pub phenomenon: Phenomenon,
    pub ambiguous: Vec<AnnotatedWord>,
    pub unambiguous: Vec<AnnotatedWord>,
    pub t_star_plus: usize,
    pub t_star_minus: usize,
}

impl SentencePair {
    pub fn side(&self, a: Ambiguity) -> &[AnnotatedWord] {
        match a {
            Ambiguity::Ambiguous => &self.ambiguous,
            Ambiguity::Unambiguous => &self.unambiguous,
        }
    }

    pub fn t_star(&self, a: Ambiguity) -> usize {
        match a {
            Ambiguity::Ambiguous => self.t_star_plus,
            Ambiguity::Unambiguous => self.t_star_minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillerSentence {
    pub item_id: String,
    pub words: Vec<AnnotatedWord>,
}

/// A sentence of the dataset addressed by `(item_id, condition)`.
#[derive(Debug, Clone, Copy)]
pub struct SentenceRef<'a> {
    pub item_id: &'a str,
    pub condition: Condition,
    pub phenomenon: Option<Phenomenon>,
    pub words: &'a [AnnotatedWord],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotatedDataset {
    pub pairs: Vec<SentencePair>,
    pub fillers: Vec<FillerSentence>,
}

impl AnnotatedDataset {
    /// Every sentence in a fixed order: each pair as `+` then `-`, then fillers.
    pub fn sentences(&self) -> Vec<SentenceRef<'_>> {
        let mut out = Vec::with_capacity(2 * self.pairs.len() + self.fillers.len());
        for p in &self.pairs {
            for (condition, words) in [
                (Condition::Ambiguous, &p.ambiguous),
                (Condition::Unambiguous, &p.unambiguous),
            ] {
                out.push(SentenceRef {
                    item_id: &p.item_id,
                    condition,
                    phenomenon: Some(p.phenomenon),
                    words,
                });
            }
        }
        for f in &self.fillers {
            out.push(SentenceRef {
                item_id: &f.item_id,
                condition: Condition::Filler,
                phenomenon: None,
                words: &f.words,
            });
        }
        out
    }

    /// Number of words in target (non-filler) sentences.
    pub fn target_token_count(&self) -> usize {
        self.pairs
            .iter()
            .map(|p| p.ambiguous.len() + p.unambiguous.len())
            .sum()
    }
}

#[derive(Debug, Deserialize)]
struct RawRow {
    item_id: String,
    #[serde(default)]
    phenomenon: String,
    condition: String,
    word_index: String,
    word_text: String,
    #[serde(default)]
    participant_id: Option<String>,
    #[serde(default)]
    rt_ms: String,
    #[serde(default)]
    is_disambiguating: String,
}

struct WordAcc {
    text: String,
    is_disambiguating: bool,
    rts: Vec<f64>,
    row: u64,
}

struct SentenceAcc {
    phenomenon: Option<Phenomenon>,
    words: BTreeMap<usize, WordAcc>,
    first_row: u64,
}

fn parse_flag(s: &str, row: u64) -> Result<bool> {
    match s.trim() {
        "0" | "" | "false" | "False" => Ok(false),
        "1" | "true" | "True" => Ok(true),
        other => Err(Error::Dataset {
            row,
            msg: format!("is_disambiguating must be 0 or 1, got `{other}`"),
        }),
    }
}

/// Loads a dataset CSV. Row numbers in errors are 1-based file lines.
pub fn load_dataset(path: &Path) -> Result<AnnotatedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::Fields)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    for required in ["item_id", "condition", "word_index", "word_text", "rt_ms"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Dataset {
                row: 1,
                msg: format!("missing column `{required}`"),
            });
        }
    }
    let raw_mode = headers.iter().any(|h| h == "participant_id");

    let mut order: Vec<(String, Condition)> = Vec::new();
    let mut sentences: HashMap<(String, Condition), SentenceAcc> = HashMap::new();
    let mut seen_participant: HashMap<(String, Condition, usize, String), u64> = HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let row = record.position().map_or(0, |p| p.line());
        let raw: RawRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::Dataset {
                row,
                msg: e.to_string(),
            })?;
        let bad = |msg: String| Error::Dataset { row, msg };

        if raw.phenomenon.trim().eq_ignore_ascii_case("agreement") {
            continue;
        }
        let condition: Condition = raw.condition.parse().map_err(bad)?;
        let phenomenon = match condition {
            Condition::Filler => None,
            _ => Some(raw.phenomenon.parse::<Phenomenon>().map_err(bad)?),
        };
        let word_index: usize = raw
            .word_index
            .trim()
            .parse()
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| bad(format!("word_index must be a positive integer, got `{}`", raw.word_index)))?;
        if raw.word_text.is_empty() {
            return Err(bad("empty word_text".into()));
        }
        let rt = match raw.rt_ms.trim() {
            "" | "NA" | "NaN" => None,
            s => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| bad(format!("rt_ms `{s}` is not a number")))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(bad(format!("rt_ms must be finite and non-negative, got {v}")));
                }
                Some(v)
            }
        };
        let disamb = parse_flag(&raw.is_disambiguating, row)?;
        if condition == Condition::Filler && disamb {
            return Err(bad("filler words cannot be disambiguating".into()));
        }

        let key = (raw.item_id.clone(), condition);
        let sentence = sentences.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            SentenceAcc {
                phenomenon,
                words: BTreeMap::new(),
                first_row: row,
            }
        });
        if sentence.phenomenon != phenomenon {
            return Err(bad(format!(
                "item {} mixes phenomena within one sentence",
                raw.item_id
            )));
        }

        if raw_mode {
            let pid = raw
                .participant_id
                .clone()
                .filter(|p| !p.is_empty())
                .ok_or_else(|| bad("empty participant_id".into()))?;
            let pk = (raw.item_id.clone(), condition, word_index, pid);
            if let Some(prev) = seen_participant.insert(pk, row) {
                return Err(bad(format!(
                    "duplicate word_index {word_index} for this participant (first at row {prev})"
                )));
            }
        }
        match sentence.words.get_mut(&word_index) {
            Some(w) if raw_mode => {
                if w.text != raw.word_text || w.is_disambiguating != disamb {
                    return Err(bad(format!(
                        "word {word_index} disagrees with row {} on text or disambiguation flag",
                        w.row
                    )));
                }
                w.rts.extend(rt);
            }
            Some(w) => {
                return Err(bad(format!(
                    "duplicate word_index {word_index} (first at row {})",
                    w.row
                )))
            }
            None => {
                sentence.words.insert(
                    word_index,
                    WordAcc {
                        text: raw.word_text,
                        is_disambiguating: disamb,
                        rts: rt.into_iter().collect(),
                        row,
                    },
                );
            }
        }
    }

    let mut finished: HashMap<(String, Condition), (Vec<AnnotatedWord>, Option<Phenomenon>, u64)> =
        HashMap::new();
    for key in &order {
        let acc = sentences.remove(key).expect("ordered key");
        let mut words = Vec::with_capacity(acc.words.len());
        for (expected, (idx, w)) in (1..).zip(acc.words) {
            if idx != expected {
                return Err(Error::Dataset {
                    row: w.row,
                    msg: format!(
                        "item {} ({}): word indices must run 1..n without gaps, missing {expected}",
                        key.0, key.1
                    ),
                });
            }
            let rt_ms = (!w.rts.is_empty()).then(|| w.rts.iter().sum::<f64>() / w.rts.len() as f64);
            words.push(AnnotatedWord {
                word_index: idx,
                text: w.text,
                rt_ms,
                is_disambiguating: w.is_disambiguating,
            });
        }
        finished.insert(key.clone(), (words, acc.phenomenon, acc.first_row));
    }

    let t_star = |words: &[AnnotatedWord], item: &str, c: Condition, row: u64| -> Result<usize> {
        let marked: Vec<usize> = words
            .iter()
            .filter(|w| w.is_disambiguating)
            .map(|w| w.word_index)
            .collect();
        match marked[..] {
            [t] => Ok(t),
            [] => Err(Error::Dataset {
                row,
                msg: format!("item {item} ({c}) has no disambiguating word"),
            }),
            _ => Err(Error::Dataset {
                row,
                msg: format!("item {item} ({c}) has {} disambiguating words", marked.len()),
            }),
        }
    };

    let mut dataset = AnnotatedDataset::default();
    for key in &order {
        let (item, condition) = key;
        match condition {
            Condition::Filler => {
                let (words, _, _) = finished.remove(key).expect("present");
                dataset.fillers.push(FillerSentence {
                    item_id: item.clone(),
                    words,
                });
            }
            Condition::Ambiguous | Condition::Unambiguous => {
                let plus_key = (item.clone(), Condition::Ambiguous);
                let minus_key = (item.clone(), Condition::Unambiguous);
                let Some((plus, ph_plus, row_plus)) = finished.remove(&plus_key) else {
                    if finished.contains_key(&minus_key) {
                        let row = finished[&minus_key].2;
                        return Err(Error::Dataset {
                            row,
                            msg: format!("item {item} has no `+` sentence"),
                        });
                    }
                    continue;
                };
                let Some((minus, ph_minus, row_minus)) = finished.remove(&minus_key) else {
                    return Err(Error::Dataset {
                        row: row_plus,
                        msg: format!("item {item} has no `-` sentence"),
                    });
                };
                if ph_plus != ph_minus {
                    return Err(Error::Dataset {
                        row: row_minus,
                        msg: format!("item {item} has different phenomena on its two sides"),
                    });
                }
                let t_star_plus = t_star(&plus, item, Condition::Ambiguous, row_plus)?;
                let t_star_minus = t_star(&minus, item, Condition::Unambiguous, row_minus)?;
                dataset.pairs.push(SentencePair {
                    item_id: item.clone(),
                    phenomenon: ph_plus.expect("targets carry a phenomenon"),
                    ambiguous: plus,
                    unambiguous: minus,
                    t_star_plus,
                    t_star_minus,
                });
            }
        }
    }
    Ok(dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoiScheme {
    /// `{t*, t*+1}`.
    Exp1,
    /// `{t*−2, …, t*+2}`.
    Exp2,
}

/// RoI word indices (1-based) on both sides of a pair, clipped to the sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiSet {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    /// True when the window was cut at a sentence boundary on either side.
    pub clipped: bool,
}

fn window(t_star: usize, len: usize, scheme: RoiScheme) -> (Vec<usize>, bool) {
    let (before, after) = match scheme {
        RoiScheme::Exp1 => (0, 1),
        RoiScheme::Exp2 => (2, 2),
    };
    let lo = t_star as i64 - before;
    let hi = (t_star + after) as i64;
    let kept: Vec<usize> = (lo..=hi)
        .filter(|&i| i >= 1 && i <= len as i64)
        .map(|i| i as usize)
        .collect();
    let clipped = kept.len() as i64 != hi - lo + 1;
    (kept, clipped)
}

pub fn roi_indices(pair: &SentencePair, scheme: RoiScheme) -> Result<RoiSet> {
    for (t, side, c) in [
        (pair.t_star_plus, &pair.ambiguous, "+"),
        (pair.t_star_minus, &pair.unambiguous, "-"),
    ] {
        if t == 0 || t > side.len() {
            return Err(Error::Contract(format!(
                "item {} ({c}): disambiguating index {t} outside 1..={}",
                pair.item_id,
                side.len()
            )));
        }
    }
    let (plus, cp) = window(pair.t_star_plus, pair.ambiguous.len(), scheme);
    let (minus, cm) = window(pair.t_star_minus, pair.unambiguous.len(), scheme);
    Ok(RoiSet {
        plus,
        minus,
        clipped: cp || cm,
    })
}

/// One target word addressed by pair, side and 1-based index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenRef {
    pub pair: usize,
    pub ambiguity: Ambiguity,
    pub word_index: usize,
}

/// Partitions all target words into the four ambiguity × region buckets.
pub fn split_conditions(
    dataset: &AnnotatedDataset,
    scheme: RoiScheme,
) -> Result<BTreeMap<ConditionKey, Vec<TokenRef>>> {
    let mut buckets: BTreeMap<ConditionKey, Vec<TokenRef>> =
        ConditionKey::ALL.iter().map(|&k| (k, Vec::new())).collect();
    for (pi, pair) in dataset.pairs.iter().enumerate() {
        let roi = roi_indices(pair, scheme)?;
        for (ambiguity, set) in [
            (Ambiguity::Ambiguous, &roi.plus),
            (Ambiguity::Unambiguous, &roi.minus),
        ] {
            for w in pair.side(ambiguity) {
                let region = if set.contains(&w.word_index) {
                    Region::Roi
                } else {
                    Region::NonRoi
                };
                buckets
                    .get_mut(&ConditionKey::new(ambiguity, region))
                    .expect("all keys present")
                    .push(TokenRef {
                        pair: pi,
                        ambiguity,
                        word_index: w.word_index,
                    });
            }
        }
    }
    Ok(buckets)
}

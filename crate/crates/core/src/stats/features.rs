// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-word regression rows with two-word spillover.
//!
//! For every lag in `t, t-1, t-2` the columns are, in order, the requested
//! measures followed by `length` and `logfreq`; a column is named
//! `{feature}_{lag}`, e.g. `surprisal_t-1`. Lagged values come from the same
//! sentence only. Missing predecessors stay `None` in the table and are
//! filled with training-set means when a [`Design`] is built.

use ndarray::Array2;

use crate::dataset::{Condition, FrequencyLexicon};
use crate::error::{Error, Result};

pub const LAGS: [&str; 3] = ["t", "t-1", "t-2"];

/// One word as input to [`build_features`].
#[derive(Debug, Clone, PartialEq)]
pub struct WordInput {
    pub word_index: usize,
    pub text: String,
    pub rt_ms: Option<f64>,
    /// One value per requested measure, `None` if unavailable.
    pub measures: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceInput {
    pub item_id: String,
    pub condition: Condition,
    pub words: Vec<WordInput>,
}

/// Identifies the word behind a feature row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub item_id: String,
    pub condition: Condition,
    pub word_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub key: RowKey,
    pub y: Option<f64>,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

/// Column names for `measures` in the fixed order.
pub fn column_names(measures: &[&str]) -> Vec<String> {
    let mut names = Vec::with_capacity(3 * (measures.len() + 2));
    for lag in LAGS {
        for m in measures.iter().copied().chain(["length", "logfreq"]) {
            names.push(format!("{m}_{lag}"));
        }
    }
    names
}

/// Character length of a word form, ignoring surrounding whitespace.
pub fn word_length(text: &str) -> f64 {
    text.trim().chars().count() as f64
}

pub fn build_features(
    sentences: &[SentenceInput],
    measures: &[&str],
    lexicon: &FrequencyLexicon,
) -> Result<FeatureTable> {
    let names = column_names(measures);
    let mut rows = Vec::new();
    for s in sentences {
        let own: Vec<Vec<f64>> = s
            .words
            .iter()
            .map(|w| {
                if w.measures.len() != measures.len() {
                    return Err(Error::MissingFeature(format!(
                        "item {} ({}) word {}: {} measure values for {} measures",
                        s.item_id,
                        s.condition,
                        w.word_index,
                        w.measures.len(),
                        measures.len()
                    )));
                }
                let mut v = Vec::with_capacity(measures.len() + 2);
                for (m, value) in measures.iter().zip(&w.measures) {
                    let value = value.filter(|x| x.is_finite()).ok_or_else(|| {
                        Error::MissingFeature(format!(
                            "item {} ({}) word {} has no {m}",
                            s.item_id, s.condition, w.word_index
                        ))
                    })?;
                    v.push(value);
                }
                v.push(word_length(&w.text));
                v.push(lexicon.lookup(&w.text));
                Ok(v)
            })
            .collect::<Result<_>>()?;
        for (i, w) in s.words.iter().enumerate() {
            let mut values = Vec::with_capacity(names.len());
            for lag in 0..LAGS.len() {
                match i.checked_sub(lag) {
                    Some(j) => values.extend(own[j].iter().map(|&x| Some(x))),
                    None => values.extend(std::iter::repeat_n(None, measures.len() + 2)),
                }
            }
            rows.push(FeatureRow {
                key: RowKey {
                    item_id: s.item_id.clone(),
                    condition: s.condition,
                    word_index: w.word_index,
                },
                y: w.rt_ms,
                values,
            });
        }
    }
    Ok(FeatureTable { names, rows })
}

impl FeatureTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingFeature(format!("no column `{name}`")))
    }

    /// Column indices for `names`, in that order.
    pub fn columns(&self, names: &[String]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.column(n)).collect()
    }

    /// Indices of rows that have a reading time.
    pub fn observed(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].y.is_some())
            .collect()
    }
}

/// Column means over a set of training rows, ignoring missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputer {
    pub means: Vec<f64>,
}

impl Imputer {
    /// Means of `columns` over `rows`. A column with no observed values gets 0.
    pub fn fit(table: &FeatureTable, rows: &[usize], columns: &[usize]) -> Self {
        let means = columns
            .iter()
            .map(|&c| {
                let (sum, n) = rows
                    .iter()
                    .filter_map(|&r| table.rows[r].values[c])
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if n == 0 {
                    0.0
                } else {
                    sum / n as f64
                }
            })
            .collect();
        Self { means }
    }
}

/// A dense design (without intercept) plus response.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    /// `imputed[[r, c]]` is true where a missing predecessor was filled in.
    pub imputed: Array2<bool>,
    pub rows: Vec<usize>,
}

impl Design {
    /// Builds the design for `rows` and column `names`. When `imputer` is
    /// `None`, means are fitted on the same rows. Rows must have a response.
    pub fn build(
        table: &FeatureTable,
        rows: &[usize],
        names: &[String],
        imputer: Option<&Imputer>,
    ) -> Result<Self> {
        let cols = table.columns(names)?;
        let fitted;
        let imputer = match imputer {
            Some(i) => i,
            None => {
                fitted = Imputer::fit(table, rows, &cols);
                &fitted
            }
        };
        if imputer.means.len() != cols.len() {
            return Err(Error::Contract(format!(
                "imputer has {} means for {} columns",
                imputer.means.len(),
                cols.len()
            )));
        }
        let mut x = Array2::zeros((rows.len(), cols.len()));
        let mut imputed = Array2::from_elem((rows.len(), cols.len()), false);
        let mut y = Vec::with_capacity(rows.len());
        for (i, &r) in rows.iter().enumerate() {
            let row = &table.rows[r];
            y.push(row.y.ok_or_else(|| {
                Error::Contract(format!(
                    "item {} ({}) word {} has no reading time",
                    row.key.item_id, row.key.condition, row.key.word_index
                ))
            })?);
            for (j, &c) in cols.iter().enumerate() {
                x[[i, j]] = match row.values[c] {
                    Some(v) => v,
                    None => {
                        imputed[[i, j]] = true;
                        imputer.means[j]
                    }
                };
            }
        }
        Ok(Self {
            names: names.to_vec(),
            x,
            y,
            imputed,
            rows: rows.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> FrequencyLexicon {
        FrequencyLexicon::parse("the\t-1\ngirl\t-4\nfed\t-5\n").unwrap()
    }

    fn sentence() -> SentenceInput {
        let words = [("The", 1.5), ("girl", 6.0), ("fed", 9.25)];
        SentenceInput {
            item_id: "1".into(),
            condition: Condition::Ambiguous,
            words: words
                .iter()
                .enumerate()
                .map(|(i, (t, s))| WordInput {
                    word_index: i + 1,
                    text: t.to_string(),
                    rt_ms: Some(300.0 + i as f64),
                    measures: vec![Some(*s)],
                })
                .collect(),
        }
    }

    #[test]
    fn column_order() {
        assert_eq!(
            column_names(&["surprisal"]),
            [
                "surprisal_t", "length_t", "logfreq_t",
                "surprisal_t-1", "length_t-1", "logfreq_t-1",
                "surprisal_t-2", "length_t-2", "logfreq_t-2",
            ]
        );
        assert_eq!(column_names(&[]).len(), 6);
    }

    #[test]
    fn third_word_matches_hand_assembled_row() {
        let t = build_features(&[sentence()], &["surprisal"], &lex()).unwrap();
        let expected = [9.25, 3.0, -5.0, 6.0, 4.0, -4.0, 1.5, 3.0, -1.0].map(Some);
        assert_eq!(t.rows[2].values, expected);
        assert_eq!(t.rows[2].y, Some(302.0));
    }

    #[test]
    fn first_word_predecessors_are_imputed() {
        let t = build_features(&[sentence()], &["surprisal"], &lex()).unwrap();
        assert_eq!(t.rows[0].values.iter().filter(|v| v.is_none()).count(), 6);
        let names = column_names(&["surprisal"]);
        let d = Design::build(&t, &[0, 1, 2], &names, None).unwrap();
        assert_eq!(d.imputed.iter().filter(|&&m| m).count(), 6 + 3);
        // surprisal_t-1 observed on rows 1 and 2: mean of 1.5 and 6.0
        assert_eq!(d.x[[0, 3]], 3.75);
        // surprisal_t-2 observed on row 2 only
        assert_eq!(d.x[[0, 6]], 1.5);
        assert_eq!(d.x[[1, 6]], 1.5);
    }

    #[test]
    fn external_imputer_is_used() {
        let t = build_features(&[sentence()], &["surprisal"], &lex()).unwrap();
        let names = column_names(&["surprisal"]);
        let cols = t.columns(&names).unwrap();
        let imp = Imputer::fit(&t, &[2], &cols);
        let d = Design::build(&t, &[0], &names, Some(&imp)).unwrap();
        assert_eq!(d.x[[0, 3]], 6.0);
    }

    #[test]
    fn missing_measure_is_an_error() {
        let mut s = sentence();
        s.words[1].measures[0] = None;
        assert!(matches!(
            build_features(&[s], &["surprisal"], &lex()),
            Err(Error::MissingFeature(_))
        ));
    }
}

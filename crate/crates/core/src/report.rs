// SPDX-License-Identifier: MIT OR Apache-2.0

//! Plot-ready JSON derived from the experiment CSVs.
//!
//! * `report_exp1.json`: per (model, phenomenon), estimated slowdown by layer
//!   and the human reference value.
//! * `report_exp2.json`: per (model, phenomenon, condition), ΔLL by layer and
//!   the depth correlation.
//! * `report_exp3.json`: per (model, phenomenon, scope), ΔLL and p per measure.
//!
//! Reports are pure functions of the CSVs; series keep the CSV row order.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset::Phenomenon;
use crate::error::{Error, Result};
use crate::experiments::{
    LayerPppProfile, Scope, SlowdownEstimate, UpdatePppReport, EXP1_SLOWDOWNS, EXP2_CORRELATIONS,
    EXP2_PPP, EXP3_PPP,
};
use crate::experiments::Exp2Cell;
use crate::io;

#[derive(Debug, Serialize)]
struct Exp1Series {
    model: String,
    phenomenon: Phenomenon,
    layers: Vec<usize>,
    estimated_ms: Vec<f64>,
    human_ms: f64,
    n_pairs: usize,
}

#[derive(Debug, Serialize)]
struct Exp2Series {
    model: String,
    phenomenon: Phenomenon,
    condition: String,
    layers: Vec<usize>,
    delta_ll: Vec<Option<f64>>,
    pearson_r: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Exp3Entry {
    measure: String,
    reference: String,
    delta_ll: Option<f64>,
    p_value: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Exp3Group {
    model: String,
    phenomenon: Phenomenon,
    scope: Scope,
    n: usize,
    measures: Vec<Exp3Entry>,
}

/// Groups consecutive-or-not rows by key, keeping first-appearance order.
fn group_by<T, K: PartialEq>(rows: Vec<T>, key: impl Fn(&T) -> K) -> Vec<(K, Vec<T>)> {
    let mut groups: Vec<(K, Vec<T>)> = Vec::new();
    for r in rows {
        let k = key(&r);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups
}

/// Writes every report whose inputs exist in `dir`; returns the files written.
pub fn write_reports(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let p = dir.join(EXP1_SLOWDOWNS);
    if p.exists() {
        let rows: Vec<SlowdownEstimate> = io::read_csv(&p)?;
        let series: Vec<Exp1Series> = group_by(rows, |r| (r.model.clone(), r.phenomenon))
            .into_iter()
            .map(|((model, phenomenon), rows)| Exp1Series {
                model,
                phenomenon,
                layers: rows.iter().map(|r| r.layer).collect(),
                estimated_ms: rows.iter().map(|r| r.estimated_ms).collect(),
                human_ms: rows[0].human_ms,
                n_pairs: rows[0].n_pairs,
            })
            .collect();
        let out = dir.join("report_exp1.json");
        io::write_json(&out, &series)?;
        written.push(out);
    }

    let p = dir.join(EXP2_PPP);
    if p.exists() {
        let cells: Vec<Exp2Cell> = io::read_csv(&p)?;
        let corr_path = dir.join(EXP2_CORRELATIONS);
        let profiles: Vec<LayerPppProfile> = if corr_path.exists() {
            io::read_csv(&corr_path)?
        } else {
            Vec::new()
        };
        let series: Vec<Exp2Series> =
            group_by(cells, |c| (c.model.clone(), c.phenomenon, c.condition))
                .into_iter()
                .map(|((model, phenomenon, condition), cells)| Exp2Series {
                    pearson_r: profiles
                        .iter()
                        .find(|p| {
                            p.model == model && p.phenomenon == phenomenon && p.condition == condition
                        })
                        .and_then(|p| p.pearson_r),
                    model,
                    phenomenon,
                    condition: condition.to_string(),
                    layers: cells.iter().map(|c| c.layer).collect(),
                    delta_ll: cells.iter().map(|c| c.delta_ll).collect(),
                })
                .collect();
        let out = dir.join("report_exp2.json");
        io::write_json(&out, &series)?;
        written.push(out);
    }

    let p = dir.join(EXP3_PPP);
    if p.exists() {
        let rows: Vec<UpdatePppReport> = io::read_csv(&p)?;
        let groups: Vec<Exp3Group> = group_by(rows, |r| (r.model.clone(), r.phenomenon, r.scope))
            .into_iter()
            .map(|((model, phenomenon, scope), rows)| Exp3Group {
                model,
                phenomenon,
                scope,
                n: rows[0].n,
                measures: rows
                    .into_iter()
                    .map(|r| Exp3Entry {
                        measure: r.measure,
                        reference: r.reference,
                        delta_ll: r.delta_ll,
                        p_value: r.p_value,
                    })
                    .collect(),
            })
            .collect();
        let out = dir.join("report_exp3.json");
        io::write_json(&out, &groups)?;
        written.push(out);
    }

    if written.is_empty() {
        return Err(Error::MissingPrerequisite(format!(
            "no experiment results in {}; run `lsurp run exp1|exp2|exp3` first",
            dir.display()
        )));
    }
    Ok(written)
}

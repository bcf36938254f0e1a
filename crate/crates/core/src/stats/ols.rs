// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ordinary least squares with a Gaussian likelihood.
//!
//! Predictors are centred and scaled before the normal equations are formed,
//! the scaled Gram matrix is divided by `n` and factored by Cholesky. If the
//! factorisation fails a ridge of `1e-8` is added to its diagonal once; a
//! second failure is [`Error::SingularDesign`]. Coefficients are reported on
//! the original scale.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use super::features::Design;
use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const RIDGE: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    /// `intercept` followed by the design columns.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub sigma2: f64,
    pub n: usize,
    pub loglik: f64,
    /// Number of estimated coefficients, intercept included.
    pub df: usize,
    pub ridge: bool,
    #[serde(skip)]
    pub row_digest: u64,
}

impl RegressionFit {
    pub fn predict_row(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(x.iter())
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    /// Gaussian log-likelihood of `(x, y)` under this fit's coefficients and variance.
    pub fn loglik_on(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
        let pred = self.predict(x);
        let ln_2pi_s2 = (2.0 * std::f64::consts::PI * self.sigma2).ln();
        pred.iter()
            .zip(y)
            .map(|(p, y)| -0.5 * (ln_2pi_s2 + (y - p).powi(2) / self.sigma2))
            .sum()
    }
}

/// `−n/2 · (ln(2πσ²) + 1)`.
pub fn gaussian_loglik(n: usize, sigma2: f64) -> f64 {
    -(n as f64) / 2.0 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

/// FNV-1a over the response bits, used to check that two fits share rows.
fn digest(rows: &[usize], y: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for &r in rows {
        eat(r as u64);
    }
    for v in y {
        eat(v.to_bits());
    }
    h
}

/// In-place Cholesky of a symmetric matrix; returns `false` on a non-positive pivot.
fn cholesky(a: &mut Array2<f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if !(d > PIVOT_TOL) {
            return false;
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[[i, k]] * z[k];
        }
        z[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[[k, i]] * z[k];
        }
        z[i] /= l[[i, i]];
    }
    z
}

/// Fits `y = β0 + X β` by least squares. `x` excludes the intercept.
pub fn fit_matrix(names: &[String], x: ArrayView2<'_, f64>, y: &[f64]) -> Result<RegressionFit> {
    fit_impl(names, x, y, &(0..y.len()).collect::<Vec<_>>())
}

pub fn fit_ols(design: &Design) -> Result<RegressionFit> {
    fit_impl(&design.names, design.x.view(), &design.y, &design.rows)
}

fn fit_impl(
    names: &[String],
    x: ArrayView2<'_, f64>,
    y: &[f64],
    rows: &[usize],
) -> Result<RegressionFit> {
    let (n, p) = x.dim();
    if names.len() != p || y.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "design {n}x{p} with {} names and {} responses",
            names.len(),
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::Contract(format!(
            "{n} rows cannot identify {p} predictors plus an intercept"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Contract("design contains a non-finite value".into()));
    }

    let nf = n as f64;
    let mut mean = vec![0.0; p];
    let mut scale = vec![1.0; p];
    for j in 0..p {
        let col = x.column(j);
        mean[j] = col.sum() / nf;
        let ss = col.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / nf;
        if ss > 0.0 {
            scale[j] = ss.sqrt();
        }
    }
    // Standardised design with a leading column of ones.
    let mut z = Array2::<f64>::ones((n, p + 1));
    for i in 0..n {
        for j in 0..p {
            z[[i, j + 1]] = (x[[i, j]] - mean[j]) / scale[j];
        }
    }
    let gram = z.t().dot(&z) / nf;
    let rhs: Vec<f64> = (0..=p)
        .map(|j| z.column(j).iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / nf)
        .collect();

    let mut l = gram.clone();
    let mut ridge = false;
    if !cholesky(&mut l) {
        ridge = true;
        l = gram;
        for j in 0..=p {
            l[[j, j]] += RIDGE;
        }
        if !cholesky(&mut l) {
            return Err(Error::SingularDesign);
        }
    }
    let gamma = cholesky_solve(&l, &rhs);

    let mut coefficients = Vec::with_capacity(p + 1);
    let mut intercept = gamma[0];
    for j in 0..p {
        intercept -= gamma[j + 1] * mean[j] / scale[j];
    }
    coefficients.push(intercept);
    coefficients.extend((0..p).map(|j| gamma[j + 1] / scale[j]));

    let mut fit = RegressionFit {
        names: std::iter::once("intercept".to_string())
            .chain(names.iter().cloned())
            .collect(),
        coefficients,
        sigma2: 0.0,
        n,
        loglik: 0.0,
        df: p + 1,
        ridge,
        row_digest: digest(rows, y),
    };
    let rss: f64 = fit
        .predict(x)
        .iter()
        .zip(y)
        .map(|(p, y)| (y - p).powi(2))
        .sum();
    fit.sigma2 = (rss / nf).max(VARIANCE_FLOOR);
    fit.loglik = gaussian_loglik(n, fit.sigma2);
    Ok(fit)
}

/// Log-likelihood gain of a full model over a nested baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PppResult {
    pub delta_ll: f64,
    pub ll_full: f64,
    pub ll_baseline: f64,
    pub df_diff: usize,
}

pub fn delta_ll(full: &RegressionFit, baseline: &RegressionFit) -> Result<PppResult> {
    if full.n != baseline.n || full.row_digest != baseline.row_digest {
        return Err(Error::Contract(
            "full and baseline models were fitted on different rows".into(),
        ));
    }
    if let Some(extra) = baseline.names.iter().find(|n| !full.names.contains(n)) {
        return Err(Error::Contract(format!(
            "baseline predictor `{extra}` is not in the full model"
        )));
    }
    Ok(PppResult {
        delta_ll: full.loglik - baseline.loglik,
        ll_full: full.loglik,
        ll_baseline: baseline.loglik,
        df_diff: full.df - baseline.df,
    })
}

/// Held-out ΔLL: rows are split into `k` folds by position modulo `k`; each
/// fold is scored with models (and imputation means) fitted on the others.
/// `build(train_rows, eval_rows, columns)` must return `(train, eval)` designs.
pub fn cv_delta_ll<F>(
    rows: &[usize],
    full_columns: &[String],
    baseline_columns: &[String],
    k: usize,
    build: F,
) -> Result<PppResult>
where
    F: Fn(&[usize], &[usize], &[String]) -> Result<(Design, Design)>,
{
    if k < 2 || k > rows.len() {
        return Err(Error::Contract(format!(
            "cannot split {} rows into {k} folds",
            rows.len()
        )));
    }
    let mut ll_full = 0.0;
    let mut ll_baseline = 0.0;
    for fold in 0..k {
        let (test, train): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
            rows.iter().copied().enumerate().partition(|(i, _)| i % k == fold);
        let test: Vec<usize> = test.into_iter().map(|(_, r)| r).collect();
        let train: Vec<usize> = train.into_iter().map(|(_, r)| r).collect();
        for (columns, acc) in [(full_columns, &mut ll_full), (baseline_columns, &mut ll_baseline)] {
            let (tr, ev) = build(&train, &test, columns)?;
            let fit = fit_ols(&tr)?;
            *acc += fit.loglik_on(ev.x.view(), &ev.y);
        }
    }
    Ok(PppResult {
        delta_ll: ll_full - ll_baseline,
        ll_full,
        ll_baseline,
        df_diff: full_columns.len().saturating_sub(baseline_columns.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn exact_line() {
        let x = array![[0.0], [1.0], [2.0]];
        let f = fit_matrix(&names(1), x.view(), &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert_eq!(f.sigma2, VARIANCE_FLOOR);
        assert_eq!(f.loglik, gaussian_loglik(3, VARIANCE_FLOOR));
    }

    #[test]
    fn constant_response() {
        let x = array![[0.0], [1.0], [5.0], [2.0]];
        let f = fit_matrix(&names(1), x.view(), &[4.0; 4]).unwrap();
        assert!((f.coefficients[0] - 4.0).abs() < 1e-12);
        assert!(f.coefficients[1].abs() < 1e-12);
        assert_eq!(f.loglik, -2.0 * ((2.0 * std::f64::consts::PI * 1e-6).ln() + 1.0));
    }

    #[test]
    fn duplicated_column_falls_back_to_ridge() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [4.0, 4.0]];
        let f = fit_matrix(&names(2), x.view(), &[1.0, 2.0, 2.5, 5.0]).unwrap();
        assert!(f.ridge);
        assert!(f.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn too_few_rows_and_bad_values() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            fit_matrix(&names(2), x.view(), &[1.0, 2.0]),
            Err(Error::Contract(_))
        ));
        let x = array![[0.0], [f64::NAN], [1.0]];
        assert!(fit_matrix(&names(1), x.view(), &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn delta_ll_contract() {
        let x = array![[0.0, 1.0], [1.0, 3.0], [2.0, 2.0], [3.0, 7.0], [4.0, 1.0]];
        let y = [1.0, 2.0, 2.0, 4.0, 3.5];
        let full = fit_matrix(&names(2), x.view(), &y).unwrap();
        let base = fit_matrix(&names(1), x.slice(ndarray::s![.., 0..1]), &y).unwrap();
        let r = delta_ll(&full, &base).unwrap();
        assert!(r.delta_ll >= -1e-9);
        assert_eq!(r.df_diff, 1);
        assert_eq!(delta_ll(&full, &full).unwrap().delta_ll, 0.0);
        let other = fit_matrix(&names(1), x.slice(ndarray::s![.., 0..1]), &[1.0, 2.0, 2.0, 4.0, 3.0])
            .unwrap();
        assert!(matches!(delta_ll(&full, &other), Err(Error::Contract(_))));
        assert!(matches!(delta_ll(&base, &full), Err(Error::Contract(_))));
    }
}

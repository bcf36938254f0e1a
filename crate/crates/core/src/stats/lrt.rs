// SPDX-License-Identifier: MIT OR Apache-2.0

//! Likelihood-ratio test for nested Gaussian regressions.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// ΔLL values this far below zero are rounding noise from nested fits.
const NEGATIVE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrtResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `statistic = 2·ΔLL`, `p` is the chi-squared upper tail with `df` degrees.
pub fn lr_test(delta_ll: f64, df: usize) -> Result<LrtResult> {
    if df == 0 {
        return Err(Error::Contract("likelihood-ratio test needs df ≥ 1".into()));
    }
    if !delta_ll.is_finite() || delta_ll < -NEGATIVE_SLACK {
        return Err(Error::Contract(format!(
            "likelihood-ratio test needs ΔLL ≥ 0, got {delta_ll}"
        )));
    }
    let statistic = 2.0 * delta_ll.max(0.0);
    let chi2 = ChiSquared::new(df as f64).expect("df ≥ 1 is valid");
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        chi2.sf(statistic).clamp(0.0, 1.0)
    };
    Ok(LrtResult {
        statistic,
        df,
        p_value,
    })
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reading-time regression: features, OLS, ΔLL, likelihood-ratio tests and
//! correlation.

mod correlation;
mod features;
mod lrt;
mod ols;

pub use correlation::pearson;
pub use features::{
    build_features, column_names, word_length, Design, FeatureRow, FeatureTable, Imputer,
    RowKey, SentenceInput, WordInput, LAGS,
};
pub use lrt::{lr_test, LrtResult};
pub use ols::{
    cv_delta_ll, delta_ll, fit_matrix, fit_ols, gaussian_loglik, PppResult, RegressionFit, RIDGE,
    VARIANCE_FLOOR,
};

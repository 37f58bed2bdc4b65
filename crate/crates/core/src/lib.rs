//! Active test-point selection for label-efficient model evaluation.
//!
//! A fixed model is evaluated on a pool of unlabeled test points. Instead of
//! labeling a uniform subsample, labels are acquired one at a time from a
//! stochastic proposal built from a surrogate's expected loss, and the
//! importance-weighted estimator in [`estimators`] removes the selection bias.
//!
//! Module map:
//! - [`estimators`]: full-pool risk, subsample mean, the weighted
//!   without-replacement estimator, and the with-replacement IS baseline.
//! - [`acquisition`]: expected-loss scores, clipped proposals, sampling.
//! - [`models`]: GP regression, least squares, random forests, ensembles.
//! - [`datasets`]: synthetic pools and train/test splits.
//! - [`harness`]: the acquisition loop, replication, and summary metrics.
//! - [`config`] / [`cli`]: JSON experiment files, presets, CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod models;
pub mod numeric;
pub mod output;

pub use error::{Error, Result};

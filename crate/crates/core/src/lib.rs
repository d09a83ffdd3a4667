//! Bayesian coherence scoring for autoregressive language models.
//!
//! A model's credences are read off as cumulative token log-probabilities of
//! class and evidence strings under three assembled contexts (prior,
//! likelihood, posterior). For every class pair, evidence, and history the
//! pipeline records the expected update (log likelihood ratio) and the
//! observed update (log posterior ratio minus log prior ratio); the Bayesian
//! Coherence Coefficient is their Pearson correlation.
//!
//! Crate layout:
//! - [`dataset`]: corpus format, validation, tuple enumeration
//! - [`backend`]: the scoring contract plus synthetic, remote, and cached models
//! - [`assembly`]: context construction and the scoring pipeline
//! - [`metrics`]: BCC, BCE, update gradient, direction agreement, bins, sweeps
//! - [`report`]: CSV / JSON / SVG / table emission
//! - [`cli`]: the `bayescoh` command front end
//! - [`stats`]: scalar-generic correlation, OLS, and Student-t kernels

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod backend;
pub mod cli;
pub mod dataset;
pub mod metrics;
pub mod report;
pub mod scalar;
pub mod stats;
pub mod tokenize;

pub use scalar::Real;

/// Scalar used for log-probabilities, updates, and reported metrics.
pub type Scalar = f64;
pub type Correlation = stats::Correlation<Scalar>;
pub type LinearFit = stats::LinearFit<Scalar>;
pub type Correlation32 = stats::Correlation<f32>;
pub type LinearFit32 = stats::LinearFit<f32>;

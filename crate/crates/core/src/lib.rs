//! Data-driven modelling toolkit.
//!
//! The pipeline mirrors how a modeller works from the literature outward:
//!
//! 1. [`dataset`] ingests per-study datapoints with provenance, normalizes
//!    unit and synonym labels, and merges studies into a combined dataset.
//! 2. [`synth`] rebuilds microdata from published descriptive statistics
//!    (mean, SD or an upper prediction limit) for normal and lognormal ages.
//! 3. [`models`] holds a registry of parametric families behind the
//!    [`models::Model`] trait; new families are registered by name.
//! 4. [`fit`] runs bounded Levenberg–Marquardt fits, multi-start, and ranks
//!    the whole catalog by r² under a plausibility predicate.
//! 5. [`validate`] checks a fitted model on unseen data.
//! 6. [`analyze`] derives secondary quantities: derivatives, peak ages,
//!    percent remaining, prediction bands and cross-model correlation.
//! 7. [`plot`] renders datasets and fits as standalone SVG.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod models;
pub mod plot;
pub mod rng;
pub mod synth;
pub mod validate;

pub use error::{Error, Result};

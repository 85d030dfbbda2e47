//! Recurrence-quantification features for speech: delay embedding,
//! recurrence plots, line-structure measures, functionals over frame
//! sequences, and a small classification harness.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod manifest;
pub mod pipeline;
pub mod recurrence;
pub mod rqa;
pub mod signal;

pub use error::{Error, Result};

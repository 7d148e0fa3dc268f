//! Evaluation and fusion of lung-nodule detection and malignancy models.

// `!(a < b)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod growth;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod stats;
pub mod subgroup;

pub use error::{Error, Result};

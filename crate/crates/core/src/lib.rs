//! Multi-object tracking by iterative hypothesis testing on a tracklet graph.

// Negated comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bench;
pub mod config;
pub mod detection;
pub mod driver;
pub mod error;
pub mod eval;
pub mod formats;
pub mod graph;
pub mod hypothesis;
pub mod path;
pub mod scene;
pub mod track;
pub mod tracklet;

pub use error::{Error, Result};

//! Brain graph super-resolution by learning on the line graph of the target
//! resolution.
//!
//! A low-resolution connectome is embedded by a graph transformer block, its
//! Gram matrix initialises the high-resolution edge features, and those edge
//! features are refined as node features of the dual (line) graph of the
//! complete high-resolution graph before being folded back into a symmetric
//! matrix. The crate also carries the reverse-mode engine, the baselines, the
//! training harness and a set of weighted-network topology measures used for
//! evaluation.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod seed;
pub mod training;

pub use error::{Error, Result};

//! Files, training loops and experiment plumbing around `graphae-core`.
//!
//! Datasets are PNG images plus a JSONL manifest, checkpoints are named
//! parameter archives with the model configuration embedded, and
//! experiments are described by a TOML [`config::ExperimentConfig`].

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph_json;
pub mod image_io;
pub mod report;
pub mod train;

pub use error::{Error, Result};
pub use graphae_core as core;

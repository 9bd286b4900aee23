//! Numerics for a self-supervised image-to-graph auto-encoder.
//!
//! An encoder turns a line drawing into a graph bottleneck (node coordinates
//! plus a soft adjacency matrix) and a decoder draws that graph back onto a
//! canvas. Every stage carries an explicit backward pass so the whole chain
//! trains from an image-similarity loss alone.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature only
//! switches the matrix kernels and float math to their std-backed variants.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baseline;
pub mod coords;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod sampling;
pub mod shapes;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;

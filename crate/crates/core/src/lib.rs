//! Extraction of stratified answer-set programs from trained feed-forward
//! networks.
//!
//! The pipeline: generate or load a [`dataset`], train a [`network`],
//! extract a [`program`] layer by layer with [`extraction`] (decision trees
//! from [`tree`] over captured activations), then use the program as a
//! classifier and measure it with [`analysis`].

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod extraction;
pub mod fixed_point;
pub mod network;
pub mod program;
pub mod tree;

pub use error::{Error, Result};

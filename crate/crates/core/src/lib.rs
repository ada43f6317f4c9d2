//! Bias-controlled synthetic data generation for LLM fine-tuning experiments.
//!
//! This crate is the allocation-only core: the record data model, a
//! versioned deterministic sampler, the bias-type prompt catalog and name
//! pools, bias-ratio mixing, the three mitigation strategies, and
//! group-sliced evaluation metrics. It performs no IO; file formats, the
//! model client and the experiment runner live in the `biasforge` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod batch;
pub mod catalog;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod mitigation;
pub mod mixer;
pub mod names;
pub mod render;
pub mod sample;
pub mod text;
pub mod types;

pub use dataset::{Dataset, Manifest, ProvenanceCounts};
pub use embedding::EmbeddingSet;
pub use error::{Error, Result};
pub use types::{
    Age, Axis, BiasSpec, BiasType, Culture, Gender, Profession, Profile, Provenance, Record,
    Workplace,
};

//! Files, model clients, the training-bridge contract and the experiment
//! runner built on `biasforge_core`.

pub mod bridge;
pub mod client;
pub mod error;
pub mod io;
pub mod orchestrator;
pub mod report;
pub mod resources;
pub mod tasks;
pub mod toy;

pub use error::{Error, Result};

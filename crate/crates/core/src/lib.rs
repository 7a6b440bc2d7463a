pub mod allocation;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod monitor;
pub mod orchestrator;
pub mod report;
pub mod splitter;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

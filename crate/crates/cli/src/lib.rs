//! Pipelines behind the `relrank` command-line tool.

pub mod config;
pub mod pipeline;

pub use config::PipelineConfig;

//! Emotion-aware speech service: configuration, the analyze pipeline,
//! session logging, and the HTTP API.

pub mod clips;
pub mod config;
pub mod pipeline;
pub mod server;
pub mod session;

pub use config::ServiceConfig;
pub use pipeline::{AnalyzeError, AnalyzeResponse, Pipeline};

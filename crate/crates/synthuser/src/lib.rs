//! File formats, the multi-agent play engine, the HTTP server and the
//! pipeline behind the `synthuser` command.

pub mod config;
pub mod engine;
pub mod http;
pub mod model_io;
pub mod pipeline;
pub mod report;
pub mod trace_io;

pub use synthuser_core as core;

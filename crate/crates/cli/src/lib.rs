//! Command-line front end: argument parsing, pipeline orchestration and
//! run manifests.

mod config;
mod error;
mod manifest;
mod pipeline;

pub use config::{parse_cli, PathSpec, RunConfig, Task};
pub use error::CliError;
pub use manifest::{RunManifest, ShapeCounts, SolverDiagnostics};
pub use pipeline::run_pipeline;

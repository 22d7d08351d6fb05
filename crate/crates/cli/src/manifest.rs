use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeCounts {
    pub name: String,
    pub boundary: usize,
    pub normal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub dim: usize,
    pub kernel: String,
    pub centers: usize,
    /// Smallest pivot magnitude of the factorization.
    pub min_pivot: Option<f64>,
    pub affine_rank: Option<usize>,
}

/// Record written next to the outputs of every run. Everything except
/// `timings_ms` is a function of the inputs and configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub output_digits: usize,
    pub shapes: Vec<ShapeCounts>,
    pub solver: Vec<SolverDiagnostics>,
    pub outputs: Vec<String>,
    pub timings_ms: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn new(config: RunConfig, output_digits: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            output_digits,
            shapes: Vec::new(),
            solver: Vec::new(),
            outputs: Vec::new(),
            timings_ms: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|source| CliError::Output {
            path: path.to_path_buf(),
            source,
        })
    }
}

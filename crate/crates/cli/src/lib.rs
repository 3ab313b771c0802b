//! Batch pipeline: geometry → triangle mesh → adaptive solve → field
//! analysis → separatrix tracing → coarse quad mesh → refined quad mesh.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod config;
pub mod pipeline;
pub mod render;

pub use config::PipelineConfig;
pub use pipeline::{Pipeline, Summary, Timings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Solve,
    Analyze,
    Trace,
    Mesh,
    Refine,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Solve, Stage::Analyze, Stage::Trace, Stage::Mesh, Stage::Refine];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Solve => "solve",
            Stage::Analyze => "analyze",
            Stage::Trace => "trace",
            Stage::Mesh => "mesh",
            Stage::Refine => "refine",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}; expected one of solve, analyze, trace, mesh, refine"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unusable input: {0}")]
    Input(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("stage {stage} needs {}, which does not exist; run the upstream stages first", path.display())]
    MissingArtifact { stage: Stage, path: PathBuf },
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh failed validation: {0}")]
    Invalid(String),
}

impl CliError {
    /// 2 for configuration and input problems, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            _ => 1,
        }
    }
}

use std::path::{Path, PathBuf};

use pathwise_core::consensus::ConsensusError;
use pathwise_core::curriculum::{CurriculumError, McqError};
use pathwise_core::grpo::GrpoError;
use pathwise_core::{ClientError, GraphError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("stage `{stage}` needs {} (run `pathwise {producer}` first or pass it explicitly)", path.display())]
    MissingInput {
        stage: &'static str,
        path: PathBuf,
        producer: &'static str,
    },
    #[error("stage `{stage}`: {message}")]
    Input { stage: &'static str, message: String },
    #[error("stage `{stage}`: remote service failed: {message}")]
    Remote { stage: &'static str, message: String },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(stage: &'static str, message: impl ToString) -> Self {
        CliError::Input {
            stage,
            message: message.to_string(),
        }
    }

    pub fn remote(stage: &'static str, message: impl ToString) -> Self {
        CliError::Remote {
            stage,
            message: message.to_string(),
        }
    }

    /// 2 for bad config or inputs, 3 when a remote service failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Remote { .. } => 3,
            _ => 2,
        }
    }

    pub fn graph(stage: &'static str, e: GraphError) -> Self {
        CliError::input(stage, e)
    }

    pub fn client(stage: &'static str, e: ClientError) -> Self {
        CliError::remote(stage, e)
    }

    pub fn consensus(stage: &'static str, e: ConsensusError) -> Self {
        match e {
            ConsensusError::JudgeUnavailable { .. } => CliError::remote(stage, e),
            ConsensusError::Graph(g) => CliError::graph(stage, g),
        }
    }

    pub fn curriculum(stage: &'static str, e: CurriculumError) -> Self {
        match e {
            CurriculumError::Mcq(m) => CliError::mcq(stage, m),
            other => CliError::input(stage, other),
        }
    }

    pub fn mcq(stage: &'static str, e: McqError) -> Self {
        match e {
            McqError::Client(c) => CliError::client(stage, c),
            other => CliError::input(stage, other),
        }
    }

    pub fn grpo(stage: &'static str, e: GrpoError) -> Self {
        match e {
            GrpoError::PolicyUnavailable { ref policy, .. } if policy == "remote" => CliError::remote(stage, e),
            other => CliError::input(stage, other),
        }
    }
}

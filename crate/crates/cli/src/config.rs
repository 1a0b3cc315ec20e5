//! Pipeline configuration, loaded from one TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use pathwise_core::client::EndpointConfig;
use pathwise_core::consensus::ConsensusOptions;
use pathwise_core::extract::{ChunkConfig, DelimiterSet};
use pathwise_core::{FitMethod, GrpoConfig, PruningConfig, RewardConfig, StratumTarget};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Global seed; every stochastic stage derives its stream from it.
    #[serde(default)]
    pub seed: u64,
    /// Use deterministic in-process models instead of remote endpoints.
    #[serde(default)]
    pub mock: bool,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub chunk: ChunkConfig,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub judges: JudgeConfig,
    #[serde(default)]
    pub pruning: PruningConfig,
    #[serde(default)]
    pub curriculum: CurriculumConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub grpo: GrpoConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Directory of `*.txt` source documents.
    pub corpus_dir: PathBuf,
    /// Parent of the per-config run directories.
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus_dir: "corpus".into(),
            output_dir: "runs".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionConfig {
    pub delimiters: DelimiterSet,
    pub endpoint: Option<EndpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeConfig {
    pub judge_a: Option<EndpointConfig>,
    pub judge_b: Option<EndpointConfig>,
    /// JSON rule tables for the mock judges; approve-all when unset.
    pub mock_rules_a: Option<PathBuf>,
    pub mock_rules_b: Option<PathBuf>,
    /// Candidates judged concurrently.
    pub max_in_flight: usize,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            judge_a: None,
            judge_b: None,
            mock_rules_a: None,
            mock_rules_b: None,
            max_in_flight: ConsensusOptions::default().max_in_flight,
        }
    }
}

impl JudgeConfig {
    pub fn options(&self) -> ConsensusOptions {
        ConsensusOptions {
            max_in_flight: self.max_in_flight,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationKind {
    #[default]
    Template,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    pub targets: Vec<StratumTarget>,
    pub generation: GenerationKind,
    pub generator: Option<EndpointConfig>,
    pub max_in_flight: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            targets: StratumTarget::default_plan(),
            generation: GenerationKind::Template,
            generator: None,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Toy,
    Recorded,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// JSONL of recorded samples for `kind = "recorded"`.
    pub transcript: Option<PathBuf>,
    pub base_url: Option<String>,
    pub timeout_secs: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::Toy,
            transcript: None,
            base_url: None,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub fit_method: FitMethod,
    pub hops: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fit_method: FitMethod::Endpoint,
            hops: pathwise_core::eval::REPORTED_HOPS.to_vec(),
        }
    }
}

/// A parsed config with its identity hash and file-relative paths resolved.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    /// First 12 hex digits of the SHA-256 of the effective config as written
    /// (before path resolution), so the hash does not depend on where the
    /// workspace lives.
    pub hash: String,
}

impl LoadedConfig {
    pub fn load(path: &Path, force_mock: bool) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: PipelineConfig = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.mock |= force_mock;
        config.validate().map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        let canonical = serde_json::to_vec(&config).expect("config serializes");
        let hash = hex::encode(Sha256::digest(&canonical))[..12].to_string();
        config.grpo.seed = config.seed;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        Ok(LoadedConfig { config, hash })
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<(), String> {
        self.extraction.delimiters.validate().map_err(|e| e.to_string())?;
        self.pruning.validate().map_err(|e| e.to_string())?;
        self.reward.validate().map_err(|e| e.to_string())?;
        self.grpo.validate().map_err(|e| e.to_string())?;
        if self.chunk.window_tokens <= self.chunk.overlap_tokens {
            return Err("chunk.window_tokens must exceed chunk.overlap_tokens".into());
        }
        if self.eval.hops.is_empty() {
            return Err("eval.hops must not be empty".into());
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.paths.corpus_dir);
        join(&mut self.paths.output_dir);
        for p in [
            &mut self.judges.mock_rules_a,
            &mut self.judges.mock_rules_b,
            &mut self.policy.transcript,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }
}

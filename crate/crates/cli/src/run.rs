//! Run directory layout, artifact I/O and per-stage manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{LoadedConfig, PipelineConfig};
use crate::error::CliError;

pub const CHUNKS: &str = "chunks/units.jsonl";
pub const CANDIDATES: &str = "extract/candidates.jsonl";
pub const SEED_KG: &str = "validate/seed_kg.jsonl";
pub const MERGED_KG: &str = "expand/merged_kg.jsonl";
pub const CURRICULUM_DIR: &str = "curriculum";

/// Everything a stage needs: the config and the run directory it writes to.
pub struct RunContext {
    pub config: PipelineConfig,
    pub hash: String,
    pub run_dir: PathBuf,
}

impl RunContext {
    pub fn new(loaded: LoadedConfig) -> Self {
        let run_dir = loaded.config.paths.output_dir.join(format!("run-{}", loaded.hash));
        RunContext {
            config: loaded.config,
            hash: loaded.hash,
            run_dir,
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.run_dir.join(rel)
    }

    /// An artifact earlier stages should have produced.
    pub fn require(&self, stage: &'static str, rel: &str, producer: &'static str) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        if path.exists() {
            Ok(path)
        } else {
            Err(CliError::MissingInput { stage, path, producer })
        }
    }

    /// The newest graph: the expanded one if present, else the seed graph.
    pub fn default_graph(&self, stage: &'static str) -> Result<PathBuf, CliError> {
        let merged = self.path(MERGED_KG);
        if merged.exists() {
            return Ok(merged);
        }
        self.require(stage, SEED_KG, "validate")
    }

    pub fn stage(&self, name: &'static str) -> Result<StageRecord<'_>, CliError> {
        let dir = self.run_dir.join(name);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(StageRecord {
            ctx: self,
            name,
            dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct StageManifest<'a> {
    stage: &'a str,
    config_hash: &'a str,
    seed: u64,
    mock: bool,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Collects a stage's inputs and outputs for its `run_manifest.json`.
pub struct StageRecord<'a> {
    ctx: &'a RunContext,
    pub name: &'static str,
    pub dir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl StageRecord<'_> {
    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write_bytes(name, to_pretty(value).as_bytes())
    }

    pub fn write_jsonl<'v, T: Serialize + 'v>(
        &mut self,
        name: &str,
        values: impl IntoIterator<Item = &'v T>,
    ) -> Result<PathBuf, CliError> {
        self.write_bytes(name, &to_jsonl(values))
    }

    /// Registers a file written by other means.
    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    /// Writes `run_manifest.json`. Paths inside the run directory are stored
    /// relative to it; outside ones by file name.
    pub fn finish(self) -> Result<(), CliError> {
        let digest = |paths: &[PathBuf]| -> Result<Vec<FileDigest>, CliError> {
            let mut out = Vec::new();
            for p in paths {
                let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
                let shown = p
                    .strip_prefix(&self.ctx.run_dir)
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|_| p.file_name().map(PathBuf::from).unwrap_or_default());
                out.push(FileDigest {
                    path: shown.to_string_lossy().replace('\\', "/"),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                });
            }
            Ok(out)
        };
        let manifest = StageManifest {
            stage: self.name,
            config_hash: &self.ctx.hash,
            seed: self.ctx.config.seed,
            mock: self.ctx.config.mock,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
        };
        let path = self.dir.join("run_manifest.json");
        fs::write(&path, to_pretty(&manifest)).map_err(|e| CliError::io(&path, e))
    }
}

pub fn to_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifacts serialize") + "\n"
}

pub fn to_jsonl<'v, T: Serialize + 'v>(values: impl IntoIterator<Item = &'v T>) -> Vec<u8> {
    let mut buf = Vec::new();
    for v in values {
        serde_json::to_writer(&mut buf, v).expect("artifacts serialize");
        buf.write_all(b"\n").expect("writing to a Vec cannot fail");
    }
    buf
}

/// Reads a JSONL file, naming the file and 1-based line on schema errors.
pub fn read_jsonl<T: DeserializeOwned>(stage: &'static str, path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(line)
            .map_err(|e| CliError::input(stage, format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(stage: &'static str, path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(stage, format!("{}: {e}", path.display())))
}

/// An explicitly named input file, which must exist.
pub fn existing(stage: &'static str, path: &Path) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::input(stage, format!("{} does not exist", path.display())))
    }
}

//! `pathwise`: staged pipeline from raw documents to a trained policy and
//! hop-stratified evaluation.
//!
//! Every stage reads the artifacts of earlier stages from the run directory
//! `<output_dir>/run-<config hash>/` and writes its own subdirectory there.
//! Exit codes: 0 success, 1 usage, 2 bad config or input, 3 remote failure.

mod config;
mod error;
mod run;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use pathwise_core::Split;

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::run::RunContext;

#[derive(Debug, Parser)]
#[command(
    name = "pathwise",
    version,
    about = "Knowledge-graph curriculum and path-aligned RL pipeline"
)]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(short, long, global = true, default_value = "pathwise.toml")]
    config: PathBuf,
    /// Use in-process mock models instead of remote endpoints.
    #[arg(long, global = true)]
    mock: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split corpus documents into overlapping text units.
    Chunk,
    /// Extract candidate triples from every text unit.
    Extract,
    /// Keep candidates both judges accept; writes the seed graph.
    Validate {
        /// Candidate triples (defaults to the extract stage output).
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Re-validate proposed triples and merge them into the graph.
    ExpandIngest {
        #[arg(long)]
        proposals: PathBuf,
        /// Graph to extend (defaults to the seed graph).
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Print node count, triple count and average degree.
    Stats {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Count surviving reasoning paths per hop length.
    Paths {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        min_hops: usize,
        #[arg(long, default_value_t = 5)]
        max_hops: usize,
    },
    /// Sample paths and render the hop-stratified question set.
    Curriculum {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Score completions with the correctness and path reward.
    Score {
        /// JSONL of `{item_id, raw_completion}`.
        #[arg(long)]
        input: PathBuf,
        /// Curriculum directory or item JSONL (defaults to the curriculum stage).
        #[arg(long)]
        items: Option<PathBuf>,
    },
    /// Train the policy with GRPO on the RL split.
    Grpo {
        /// Curriculum directory or item JSONL (defaults to the curriculum stage).
        #[arg(long, conflicts_with = "synthetic")]
        items: Option<PathBuf>,
        /// Train on N generated 2-hop items instead of a curriculum.
        #[arg(long)]
        synthetic: Option<usize>,
    },
    /// Hop-stratified accuracy report from response logs.
    Eval {
        /// `LABEL=PATH` of a JSONL response log; repeatable.
        #[arg(long, required = true)]
        input: Vec<String>,
    },
    /// Bundle items for the quiz interface.
    QuizExport {
        /// Curriculum directory (defaults to the curriculum stage).
        #[arg(long)]
        curriculum: Option<PathBuf>,
        /// Only export these splits; repeatable.
        #[arg(long, value_parser = parse_split)]
        split: Vec<Split>,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown split `{s}` (expected sft, rl or eval)"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = RunContext::new(LoadedConfig::load(&cli.config, cli.mock)?);
    log::info!("run directory {}", ctx.run_dir.display());
    match &cli.command {
        Command::Chunk => stages::chunk(&ctx),
        Command::Extract => stages::extract(&ctx),
        Command::Validate { candidates } => stages::validate(&ctx, candidates.as_deref()),
        Command::ExpandIngest { proposals, graph } => stages::expand_ingest(&ctx, proposals, graph.as_deref()),
        Command::Stats { graph } => stages::stats(&ctx, graph.as_deref()),
        Command::Paths {
            graph,
            min_hops,
            max_hops,
        } => stages::paths(&ctx, graph.as_deref(), *min_hops, *max_hops),
        Command::Curriculum { graph } => stages::curriculum(&ctx, graph.as_deref()),
        Command::Score { input, items } => stages::score(&ctx, input, items.as_deref()),
        Command::Grpo { items, synthetic } => stages::grpo(&ctx, items.as_deref(), *synthetic),
        Command::Eval { input } => stages::eval(&ctx, input),
        Command::QuizExport { curriculum, split } => stages::quiz_export(&ctx, curriculum.as_deref(), split),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

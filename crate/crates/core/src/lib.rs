//! Knowledge-graph construction, multi-hop curriculum generation, path-aligned
//! reward scoring and GRPO training.

pub mod client;
pub mod consensus;
pub mod curriculum;
pub mod error;
pub mod eval;
pub mod extract;
pub mod graph;
pub mod grpo;
pub mod mock;
pub mod paths;
pub mod reward;
pub mod seed;
pub mod synthetic;
pub mod vocab;

pub use curriculum::{CurriculumManifest, OptionLetter, QaItem, Split, StratumTarget};
pub use error::{ClientError, GraphError};
pub use eval::{EvalRecord, EvalReport, FitMethod};
pub use graph::{GraphBuilder, GraphStats, KnowledgeGraph, Triple, TripleStatus};
pub use grpo::{GrpoConfig, Policy, TabularToyPolicy, TrainStats};
pub use paths::{PruningConfig, ReasoningPath};
pub use reward::{RewardBreakdown, RewardConfig};
pub use vocab::{EntityCategory, RelationType};

//! Training loop, evaluation protocol, logs, checkpoints and diagnostics.

mod agent;
mod audit;
pub mod checkpoint;
mod config;
mod evaluate;
mod inspect;
pub mod metrics;
mod plots;
mod train;

pub use agent::{derive_seed, Advance, Agent, AgentSummary, DaqnAgent, EpisodeContext, LaunchAudit, LaunchRecord, Phase};
pub use audit::{audit_path, audit_records, cramers_v, random_walk_trace, ActionScore, AuditConfig, MarkovReport, StateScore};
pub use config::{AgentKind, ConfigError, RunConfig, RunSection, WorldConfig};
pub use evaluate::{evaluate, rollouts, Evaluation, Rollout};
pub use inspect::inspect;
pub use metrics::{MetricsRow, CSV_COLUMNS};
pub use plots::{export_plots, load_runs, Series};
pub use train::{eval_phase, train, EvalResult, RunSummary, Trainer};

//! Running sessions: configuration, component dispatch, the step loop and
//! replay.

pub mod components;
pub mod config;
pub mod engine;
pub mod replay;

pub use components::{classify_action, Proposal};
pub use config::{prepare, ComponentParams, ConfigError, NeedSpec, PolicySpec, PreparedRun, ProviderSpec, RunConfig};
pub use engine::{observe, run_session, run_session_with, RunResult, Termination, MAX_CONSECUTIVE_FAILURES};
pub use replay::{read_trace, replay, write_trace, ReplayReport, ReplayStatus, TraceError};

//! Trace files and deterministic replay.

use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::PreparedRun;
use super::engine::observe;
use crate::env::{apply_command, EnvState};
use crate::iface::ground_action;
use crate::model::{TraceEvent, TRACE_FORMAT_VERSION};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace line {line} has format version {found}; this build reads version {expected}")]
    Version { line: usize, found: u32, expected: u32 },
    #[error("trace read error: {0}")]
    Io(String),
}

pub fn write_trace(events: &[TraceEvent]) -> String {
    events.iter().map(|e| e.to_line() + "\n").collect()
}

pub fn read_trace<R: Read>(source: R) -> Result<Vec<TraceEvent>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line.map_err(|e| TraceError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        // Check the version before the shape, so old traces get a clear error.
        let raw: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| TraceError::Malformed { line: i + 1, message: e.to_string() })?;
        let found = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != TRACE_FORMAT_VERSION {
            return Err(TraceError::Version { line: i + 1, found, expected: TRACE_FORMAT_VERSION });
        }
        let event = serde_json::from_value(raw).map_err(|e| TraceError::Malformed { line: i + 1, message: e.to_string() })?;
        out.push(event);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplayStatus {
    Consistent,
    Divergence { step: u64, expected: String, actual: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    #[serde(flatten)]
    pub status: ReplayStatus,
    pub steps_replayed: usize,
    /// Logged commands that re-grounding the logged semantic action does not
    /// reproduce, as (step, index).
    pub unsound_commands: Vec<(u64, usize)>,
}

impl ReplayReport {
    pub fn is_consistent(&self) -> bool {
        self.status == ReplayStatus::Consistent
    }
}

/// Re-apply the logged commands from a fresh environment and compare the
/// observation digests step by step. Needs no provider: nothing is
/// regenerated. Failed steps carry no commands and leave the page as it was.
pub fn replay(run: &PreparedRun, trace: &[TraceEvent]) -> Result<ReplayReport, String> {
    let mut env = EnvState::start();
    let mut unsound = Vec::new();
    for (n, event) in trace.iter().enumerate() {
        for (i, cmd) in event.browser_command.iter().enumerate() {
            let (dom, _, _) = observe(run, &env)?;
            if let Some(action) = event.semantic_action.get(i) {
                if ground_action(action, &dom, &run.recipe).ok().as_ref() != Some(cmd) {
                    unsound.push((event.step, i));
                }
            }
            match apply_command(&run.index, &env, cmd, &run.config.site, run.config.page_size) {
                Ok(t) => env = t.env,
                Err(e) => {
                    return Ok(ReplayReport {
                        status: ReplayStatus::Divergence {
                            step: event.step,
                            expected: event.observation_digest.clone(),
                            actual: format!("command rejected: {e}"),
                        },
                        steps_replayed: n,
                        unsound_commands: unsound,
                    })
                }
            }
        }
        let (_, perceived, _) = observe(run, &env)?;
        let actual = perceived.digest();
        if actual != event.observation_digest {
            return Ok(ReplayReport {
                status: ReplayStatus::Divergence { step: event.step, expected: event.observation_digest.clone(), actual },
                steps_replayed: n,
                unsound_commands: unsound,
            });
        }
    }
    Ok(ReplayReport { status: ReplayStatus::Consistent, steps_replayed: trace.len(), unsound_commands: unsound })
}

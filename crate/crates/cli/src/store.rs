//! File-based run persistence: one directory per run holding the config,
//! the trace, the evaluation report and a status file.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use searchsim_core::sim::{prepare, run_session_with, ConfigError, RunConfig, RunResult, Termination};

pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.ndjson";
pub const REPORT_FILE: &str = "report.json";
pub const STATUS_FILE: &str = "status.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    Stopped,
    MaxSteps,
    Error,
    Cancelled,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        !matches!(self, RunStatus::Pending | RunStatus::Running)
    }

    /// Pending -> Running -> one terminal state.
    pub fn can_become(self, next: RunStatus) -> bool {
        match self {
            RunStatus::Pending => next == RunStatus::Running,
            RunStatus::Running => next.is_terminal(),
            _ => false,
        }
    }
}

impl From<Termination> for RunStatus {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Stopped => RunStatus::Stopped,
            Termination::MaxSteps => RunStatus::MaxSteps,
            Termination::Error => RunStatus::Error,
            Termination::Cancelled => RunStatus::Cancelled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub created: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default)]
    pub steps: u64,
    pub trace_path: String,
    pub report_path: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no run with id {0}")]
    NotFound(String),
    #[error("run {id}: cannot go from {from:?} to {to:?}")]
    Transition { id: String, from: RunStatus, to: RunStatus },
    #[error("corrupt status file for run {id}: {message}")]
    Corrupt { id: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Nanos, true)
}

/// Write to a temporary file in the same directory, then rename over the
/// target, so readers see the old or the new content and nothing between.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub struct Store {
    root: PathBuf,
    ids: Mutex<ulid::Generator>,
}

impl Store {
    /// Open (creating if needed) a run root. Runs left Pending or Running
    /// by an earlier process are marked Error and their trace is cut back
    /// to the last complete line.
    pub fn open(root: &Path) -> Result<Store, StoreError> {
        fs::create_dir_all(root)?;
        let store = Store { root: root.to_path_buf(), ids: Mutex::new(ulid::Generator::new()) };
        for mut rec in store.list()? {
            if !rec.status.is_terminal() {
                truncate_partial_line(&store.dir(&rec.run_id).join(TRACE_FILE))?;
                rec.steps = count_lines(&store.dir(&rec.run_id).join(TRACE_FILE))?;
                rec.status = RunStatus::Error;
                rec.reason = Some("interrupted: the service stopped before the run finished".into());
                rec.finished = Some(now());
                store.save(&rec)?;
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    /// Lexicographically increasing, also within one millisecond.
    pub fn new_id(&self) -> String {
        let mut g = self.ids.lock().unwrap();
        loop {
            if let Ok(id) = g.generate() {
                return id.to_string();
            }
            std::thread::yield_now();
        }
    }

    /// Persist a new Pending run. Paths in the stored config are absolute.
    pub fn create(&self, config: &RunConfig) -> Result<RunRecord, StoreError> {
        let id = self.new_id();
        let dir = self.dir(&id);
        fs::create_dir_all(&dir)?;
        let config = config.absolutized();
        write_atomic(&dir.join(CONFIG_FILE), config.to_json().as_bytes())?;
        File::create(dir.join(TRACE_FILE))?;
        let rec = RunRecord {
            run_id: id,
            config,
            status: RunStatus::Pending,
            created: now(),
            started: None,
            finished: None,
            reason: None,
            steps: 0,
            trace_path: dir.join(TRACE_FILE).display().to_string(),
            report_path: dir.join(REPORT_FILE).display().to_string(),
        };
        self.save(&rec)?;
        Ok(rec)
    }

    pub fn save(&self, rec: &RunRecord) -> Result<(), StoreError> {
        let text = serde_json::to_string_pretty(rec).expect("records serialize");
        write_atomic(&self.dir(&rec.run_id).join(STATUS_FILE), text.as_bytes())?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<RunRecord, StoreError> {
        // Ids are plain ULIDs; anything else cannot name a run directory.
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        load_record(&self.dir(id).join(STATUS_FILE), id)
    }

    pub fn list(&self) -> Result<Vec<RunRecord>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            let status = entry.path().join(STATUS_FILE);
            if status.is_file() {
                out.push(load_record(&status, &entry.file_name().to_string_lossy())?);
            }
        }
        out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        Ok(out)
    }

    /// Move a run to `next`, applying `edit` to the record first.
    pub fn transition(
        &self,
        id: &str,
        next: RunStatus,
        edit: impl FnOnce(&mut RunRecord),
    ) -> Result<RunRecord, StoreError> {
        let mut rec = self.load(id)?;
        if !rec.status.can_become(next) {
            return Err(StoreError::Transition { id: id.to_string(), from: rec.status, to: next });
        }
        rec.status = next;
        edit(&mut rec);
        self.save(&rec)?;
        Ok(rec)
    }

    /// Execute a Pending run to completion in the calling thread.
    pub fn execute(&self, id: &str, cancel: &AtomicBool) -> Result<RunRecord, StoreError> {
        let rec = self.transition(id, RunStatus::Running, |r| r.started = Some(now()))?;
        let trace = self.dir(id).join(TRACE_FILE);
        let (status, reason) = match execute_config(&rec.config, &trace, cancel) {
            Ok(Ok(result)) => (result.termination.into(), result.reason),
            Ok(Err(e)) => (RunStatus::Error, format!("invalid config: {e}")),
            Err(e) => (RunStatus::Error, format!("cannot write the trace: {e}")),
        };
        let steps = count_lines(&trace)?;
        self.transition(id, status, |r| {
            r.finished = Some(now());
            r.reason = Some(reason);
            r.steps = steps;
        })
    }
}

fn load_record(path: &Path, id: &str) -> Result<RunRecord, StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
        Err(e) => return Err(e.into()),
    };
    let mut rec: RunRecord =
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt { id: id.to_string(), message: e.to_string() })?;
    rec.config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(rec)
}

/// Run a config, appending each trace line to `trace` as it is produced.
/// The outer error is I/O; the inner one a config that does not prepare.
pub fn execute_config(
    config: &RunConfig,
    trace: &Path,
    cancel: &AtomicBool,
) -> std::io::Result<Result<RunResult, ConfigError>> {
    let prepared = match prepare(config) {
        Ok(p) => p,
        Err(e) => return Ok(Err(e)),
    };
    let mut file = OpenOptions::new().create(true).write(true).truncate(true).open(trace)?;
    let mut io_error = None;
    let result = run_session_with(
        &prepared,
        &mut |event| {
            if io_error.is_none() {
                // One write per line keeps a killed process to at most one
                // partial trailing line.
                let line = format!("{}\n", event.to_line());
                if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.flush()) {
                    io_error = Some(e);
                }
            }
        },
        Some(cancel),
    );
    if let Some(e) = io_error {
        return Err(e);
    }
    file.sync_all()?;
    Ok(result)
}

fn truncate_partial_line(path: &Path) -> std::io::Result<()> {
    let mut f = match OpenOptions::new().read(true).write(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e),
    };
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    if keep < bytes.len() {
        f.set_len(keep as u64)?;
    }
    Ok(())
}

fn count_lines(path: &Path) -> std::io::Result<u64> {
    match fs::read(path) {
        Ok(b) => Ok(b.iter().filter(|c| **c == b'\n').count() as u64),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(e),
    }
}

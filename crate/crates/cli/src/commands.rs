//! Operations shared by the command line and the HTTP service.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use searchsim_core::eval::{aggregate, analyze_trace, EvalReport, ExactTokenEmbedder, GroundTruth};
use searchsim_core::logs::{read_judgments, read_session_logs};
use searchsim_core::sim::{prepare, read_trace, replay, ReplayReport, RunConfig};

use crate::store::{write_atomic, RunRecord, CONFIG_FILE, REPORT_FILE, STATUS_FILE, TRACE_FILE};

/// Where the ground truth for an evaluation comes from. Judgments default
/// to the run config's judgments file, the task to the config's need.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthSpec {
    pub judgments: Option<String>,
    pub sessions: Option<String>,
    pub task_id: Option<String>,
}

fn read_config(run_dir: &Path) -> Result<RunConfig, String> {
    RunConfig::load(&run_dir.join(CONFIG_FILE)).map_err(|e| e.to_string())
}

fn read_run_trace(run_dir: &Path) -> Result<Vec<searchsim_core::model::TraceEvent>, String> {
    let path = run_dir.join(TRACE_FILE);
    let file = File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    read_trace(file).map_err(|e| format!("{}: {e}", path.display()))
}

/// Status of a run directory, if it has one (CLI runs and service runs both do).
pub fn read_status(run_dir: &Path) -> Option<RunRecord> {
    let text = std::fs::read_to_string(run_dir.join(STATUS_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Evaluate a finished run and write the report next to its trace.
/// `relative_to` resolves relative truth paths.
pub fn evaluate_run_dir(run_dir: &Path, truth: &TruthSpec, relative_to: &Path) -> Result<EvalReport, String> {
    if let Some(rec) = read_status(run_dir) {
        if !rec.status.is_terminal() {
            return Err(format!("run {} is still {:?}", rec.run_id, rec.status));
        }
    }
    let config = read_config(run_dir)?;
    let trace = read_run_trace(run_dir)?;
    let resolve = |p: &str| -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            relative_to.join(p)
        }
    };
    let judgments = match (&truth.judgments, &config.judgments) {
        (Some(j), _) => Some(resolve(j)),
        (None, Some(j)) => Some(config.resolve_path(j)),
        (None, None) => None,
    };
    let ground = match judgments {
        None => None,
        Some(path) => {
            let open = |p: &Path| File::open(p).map_err(|e| format!("{}: {e}", p.display()));
            let judgments = read_judgments(open(&path)?).map_err(|e| format!("{}: {e}", path.display()))?;
            let sessions = match &truth.sessions {
                Some(s) => {
                    let s = resolve(s);
                    read_session_logs(open(&s)?).map_err(|e| format!("{}: {e}", s.display()))?
                }
                None => Vec::new(),
            };
            let task = truth.task_id.clone().unwrap_or_else(|| config.need.task_id.clone());
            Some(GroundTruth::for_task(&task, &judgments, &sessions).map_err(|e| e.to_string())?)
        }
    };
    let run_id = run_dir.file_name().map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned());
    let report = analyze_trace(&run_id, &trace, ground.as_ref(), &ExactTokenEmbedder).map_err(|e| e.to_string())?;
    let all = aggregate(vec![report]);
    write_atomic(&run_dir.join(REPORT_FILE), all.to_json().as_bytes()).map_err(|e| e.to_string())?;
    Ok(all)
}

pub fn replay_run_dir(run_dir: &Path) -> Result<ReplayReport, String> {
    let config = read_config(run_dir)?;
    let trace = read_run_trace(run_dir)?;
    let prepared = prepare(&config).map_err(|e| e.to_string())?;
    replay(&prepared, &trace)
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use searchsim_core::eval::GroundTruth;
use searchsim_core::logs::{read_judgments, read_session_logs};
use searchsim_core::sim::{prepare, run_session, PreparedRun, RunConfig, RunResult};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn config(name: &str) -> RunConfig {
    RunConfig::load(&fixture(&format!("configs/{name}.json"))).expect("bundled config loads")
}

pub fn run(cfg: &RunConfig) -> RunResult {
    let prepared: PreparedRun = prepare(cfg).expect("config prepares");
    run_session(&prepared).expect("run completes")
}

pub fn truth(task_id: &str) -> GroundTruth {
    let judgments = read_judgments(std::fs::File::open(fixture("judgments.jsonl")).unwrap()).unwrap();
    let sessions = read_session_logs(std::fs::File::open(fixture("sessions.jsonl")).unwrap()).unwrap();
    GroundTruth::for_task(task_id, &judgments, &sessions).unwrap()
}

/// Script whose entries parse both as a component selection and as an
/// agent action, so every call gets something usable.
pub fn combined(component: &str, action: &str) -> String {
    format!(
        r#"{{"thoughts":"try {component}","reflections":"checked the page","chosen_component":"{component}","action":{action}}}"#
    )
}

pub fn write_script(dir: &Path, name: &str, entries: &[String], fallback: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, format!(r#"{{"responses":[{}],"fallback":{fallback}}}"#, entries.join(","))).unwrap();
    path.display().to_string()
}

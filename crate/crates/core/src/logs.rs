//! Session-log and relevance-judgment files.
//!
//! Session logs are newline-delimited objects:
//!
//! ```json
//! {"session_id":"s1","task_id":"t1","events":[
//!   {"type":"query","t":0.0,"payload":{"query":"rail refund","results":["d3","d1"]}},
//!   {"type":"click","t":4.5,"payload":{"rank":2,"doc_id":"d1"},"thought":"looks official"},
//!   {"type":"save","t":30.0,"payload":{"doc_id":"d1"}},
//!   {"type":"stop","t":31.0,"payload":{}}]}
//! ```
//!
//! Judgments are newline-delimited `{"task_id","doc_id","grade"}` objects.

use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogEventType {
    Query,
    Click,
    Save,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    #[serde(rename = "type")]
    pub kind: LogEventType,
    pub t: f64,
    #[serde(default)]
    pub payload: Value,
    /// Think-aloud annotation, stored but not used for training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<String>,
}

/// A log event with its payload checked against the schema.
#[derive(Debug, Clone, PartialEq)]
pub enum TypedEvent {
    Query { query: String, results: Vec<String> },
    Click { rank: usize, doc_id: String },
    Save { doc_id: String },
    Stop,
}

#[derive(Deserialize)]
struct QueryPayload {
    query: String,
    #[serde(default)]
    results: Vec<String>,
}

#[derive(Deserialize)]
struct ClickPayload {
    rank: usize,
    doc_id: String,
}

#[derive(Deserialize)]
struct SavePayload {
    doc_id: String,
}

impl LogEvent {
    pub fn typed(&self) -> Result<TypedEvent, String> {
        let p = self.payload.clone();
        let err = |e: serde_json::Error| format!("{:?} payload: {e}", self.kind).to_lowercase();
        match self.kind {
            LogEventType::Query => {
                let q: QueryPayload = serde_json::from_value(p).map_err(err)?;
                if q.query.trim().is_empty() {
                    return Err("query payload: empty query".into());
                }
                Ok(TypedEvent::Query { query: q.query, results: q.results })
            }
            LogEventType::Click => {
                let c: ClickPayload = serde_json::from_value(p).map_err(err)?;
                if c.rank == 0 {
                    return Err("click payload: rank must be at least 1".into());
                }
                Ok(TypedEvent::Click { rank: c.rank, doc_id: c.doc_id })
            }
            LogEventType::Save => {
                let s: SavePayload = serde_json::from_value(p).map_err(err)?;
                Ok(TypedEvent::Save { doc_id: s.doc_id })
            }
            LogEventType::Stop => Ok(TypedEvent::Stop),
        }
    }

    pub fn query(t: f64, query: &str, results: &[&str]) -> Self {
        LogEvent {
            kind: LogEventType::Query,
            t,
            payload: serde_json::json!({ "query": query, "results": results }),
            thought: None,
        }
    }

    pub fn click(t: f64, rank: usize, doc_id: &str) -> Self {
        LogEvent { kind: LogEventType::Click, t, payload: serde_json::json!({ "rank": rank, "doc_id": doc_id }), thought: None }
    }

    pub fn save(t: f64, doc_id: &str) -> Self {
        LogEvent { kind: LogEventType::Save, t, payload: serde_json::json!({ "doc_id": doc_id }), thought: None }
    }

    pub fn stop(t: f64) -> Self {
        LogEvent { kind: LogEventType::Stop, t, payload: serde_json::json!({}), thought: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub task_id: String,
    #[serde(default)]
    pub events: Vec<LogEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub task_id: String,
    pub doc_id: String,
    pub grade: u8,
}

fn read_lines<T, R: Read>(source: R, check: impl Fn(&T) -> Result<(), String>) -> Result<Vec<T>, LogError>
where
    T: for<'de> Deserialize<'de>,
{
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T =
            serde_json::from_str(&line).map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })?;
        check(&item).map_err(|message| LogError::Malformed { line: i + 1, message })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_session_logs<R: Read>(source: R) -> Result<Vec<SessionLog>, LogError> {
    read_lines(source, |_: &SessionLog| Ok(()))
}

pub fn read_judgments<R: Read>(source: R) -> Result<Vec<Judgment>, LogError> {
    read_lines(source, |j: &Judgment| {
        if j.grade > 3 {
            Err(format!("grade {} outside 0..=3", j.grade))
        } else {
            Ok(())
        }
    })
}

pub fn write_session_logs(logs: &[SessionLog]) -> String {
    logs.iter().map(|l| serde_json::to_string(l).expect("logs serialize") + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_typed_payloads() {
        let log = SessionLog {
            session_id: "s1".into(),
            task_id: "t1".into(),
            events: vec![LogEvent::query(0.0, "rail", &["d1", "d2"]), LogEvent::click(3.0, 2, "d2"), LogEvent::stop(9.0)],
        };
        let text = write_session_logs(std::slice::from_ref(&log));
        let back = read_session_logs(text.as_bytes()).unwrap();
        assert_eq!(back, vec![log]);
        assert_eq!(back[0].events[1].typed().unwrap(), TypedEvent::Click { rank: 2, doc_id: "d2".into() });
    }

    #[test]
    fn bad_payload_is_reported_not_fatal() {
        let e = LogEvent { kind: LogEventType::Click, t: 0.0, payload: serde_json::json!({"rank": 0, "doc_id": "x"}), thought: None };
        assert!(e.typed().is_err());
        let e = LogEvent { kind: LogEventType::Query, t: 0.0, payload: serde_json::json!({"q": 1}), thought: None };
        assert!(e.typed().unwrap_err().contains("query"));
    }

    #[test]
    fn judgments_validate_grade() {
        let ok = "{\"task_id\":\"t\",\"doc_id\":\"d\",\"grade\":2}\n";
        assert_eq!(read_judgments(ok.as_bytes()).unwrap()[0].grade, 2);
        let bad = "\n{\"task_id\":\"t\",\"doc_id\":\"d\",\"grade\":5}\n";
        match read_judgments(bad.as_bytes()).unwrap_err() {
            LogError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
    }
}

//! Post-run analysis of traces against ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{click_f1, ndcg_at_k, query_similarity, task_success, ClickKey, ClickScores, Embedder, TaskSuccess};
use crate::logs::{Judgment, SessionLog, TypedEvent};
use crate::model::{ActionBody, ActionKind, TraceEvent, TRACE_FORMAT_VERSION};
use crate::text::word_tokens;

pub const NDCG_DEPTH: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("trace step {step} has format version {found}; expected {expected}")]
    Version { step: u64, found: u32, expected: u32 },
    #[error("ground truth for task \"{0}\" has no judged documents")]
    EmptyTruth(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub task_id: String,
    pub relevant_docs: BTreeMap<String, u8>,
    #[serde(default)]
    pub human_sessions: Vec<SessionLog>,
}

impl GroundTruth {
    /// Keep the judgments and sessions that belong to `task_id`.
    pub fn for_task(task_id: &str, judgments: &[Judgment], sessions: &[SessionLog]) -> Result<Self, EvalError> {
        let relevant_docs: BTreeMap<String, u8> =
            judgments.iter().filter(|j| j.task_id == task_id).map(|j| (j.doc_id.clone(), j.grade)).collect();
        if relevant_docs.is_empty() {
            return Err(EvalError::EmptyTruth(task_id.to_string()));
        }
        let human_sessions = sessions.iter().filter(|s| s.task_id == task_id).cloned().collect();
        Ok(GroundTruth { task_id: task_id.to_string(), relevant_docs, human_sessions })
    }

    /// Distinct logged queries, in first-seen order.
    pub fn human_queries(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in self.human_sessions.iter().flat_map(|s| &s.events) {
            if let Ok(TypedEvent::Query { query, .. }) = e.typed() {
                if !out.contains(&query) {
                    out.push(query);
                }
            }
        }
        out
    }

    /// Logged clicks keyed by first result page of the normalized query.
    pub fn human_clicks(&self) -> BTreeSet<ClickKey> {
        let mut out = BTreeSet::new();
        for s in &self.human_sessions {
            let mut serp = None;
            for e in &s.events {
                match e.typed() {
                    Ok(TypedEvent::Query { query, .. }) => serp = Some(serp_id(&query, 1)),
                    Ok(TypedEvent::Click { rank, .. }) => {
                        if let Some(id) = &serp {
                            out.insert((id.clone(), rank));
                        }
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

/// Result pages are identified by normalized query text and page number.
pub fn serp_id(query: &str, page: usize) -> String {
    format!("{}#{page}", word_tokens(query).join(" "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorStats {
    pub steps: usize,
    pub queries: usize,
    pub page_turns: usize,
    pub clicks: usize,
    pub reads: usize,
    pub saves: usize,
    pub backs: usize,
    pub failed_actions: usize,
    /// Clicks per new query; 0 without queries.
    pub clicks_per_query: f64,
    /// Share of steps with at least one non-empty thought.
    pub thoughts_coverage: f64,
    pub components: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerpClicks {
    pub serp: String,
    pub scores: ClickScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query: String,
    /// Closest logged query.
    pub reference: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub saved: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<TaskSuccess>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ndcg10: Option<f64>,
    /// Only result pages that also occur in the logged sessions.
    #[serde(default)]
    pub click_f1_per_serp: Vec<SerpClicks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub click_f1: Option<ClickScores>,
    #[serde(default)]
    pub query_similarity: Vec<QueryScore>,
    pub stats: BehaviorStats,
}

impl RunReport {
    pub fn mean_query_similarity(&self) -> Option<f64> {
        mean(self.query_similarity.iter().map(|q| q.score))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

/// Each action of the trace with the result page it was taken on.
fn walk(trace: &[TraceEvent]) -> Vec<(&TraceEvent, Option<(String, usize)>)> {
    let mut serp: Option<(String, usize)> = None;
    let mut out = Vec::with_capacity(trace.len());
    for e in trace {
        out.push((e, serp.clone()));
        if let Some(a) = e.user_action.as_ref().filter(|a| !a.failed) {
            if let ActionBody::Query { query, page } = &a.body {
                serp = Some((query.clone(), *page));
            }
        }
    }
    out
}

pub fn behavior_stats(trace: &[TraceEvent]) -> BehaviorStats {
    let executed: Vec<_> = trace.iter().filter_map(|e| e.user_action.as_ref()).filter(|a| !a.failed).collect();
    let count = |k: ActionKind| executed.iter().filter(|a| a.kind() == k).count();
    let queries = executed.iter().filter(|a| a.is_new_query()).count();
    let clicks = count(ActionKind::Click);
    let mut components = BTreeMap::new();
    for e in trace {
        *components.entry(e.chosen_component.clone()).or_default() += 1;
    }
    let with_thoughts = trace.iter().filter(|e| e.capability_calls.iter().any(|c| !c.thoughts.trim().is_empty())).count();
    BehaviorStats {
        steps: trace.len(),
        queries,
        page_turns: count(ActionKind::Query) - queries,
        clicks,
        reads: count(ActionKind::Read),
        saves: count(ActionKind::Save),
        backs: count(ActionKind::Back),
        failed_actions: trace.iter().filter_map(|e| e.user_action.as_ref()).filter(|a| a.failed).count(),
        clicks_per_query: if queries == 0 { 0.0 } else { clicks as f64 / queries as f64 },
        thoughts_coverage: if trace.is_empty() { 0.0 } else { with_thoughts as f64 / trace.len() as f64 },
        components,
    }
}

/// Saved documents in save order, each once.
pub fn saved_in_order(trace: &[TraceEvent]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for a in trace.iter().filter_map(|e| e.user_action.as_ref()).filter(|a| !a.failed) {
        if let ActionBody::Save { doc_id } = &a.body {
            if !out.contains(doc_id) {
                out.push(doc_id.clone());
            }
        }
    }
    out
}

pub fn analyze_trace(
    run_id: &str,
    trace: &[TraceEvent],
    truth: Option<&GroundTruth>,
    embedder: &dyn Embedder,
) -> Result<RunReport, EvalError> {
    if let Some(e) = trace.iter().find(|e| e.format_version != TRACE_FORMAT_VERSION) {
        return Err(EvalError::Version { step: e.step, found: e.format_version, expected: TRACE_FORMAT_VERSION });
    }
    let saved = saved_in_order(trace);
    let mut report = RunReport {
        run_id: run_id.to_string(),
        saved: saved.clone(),
        success: None,
        ndcg10: None,
        click_f1_per_serp: Vec::new(),
        click_f1: None,
        query_similarity: Vec::new(),
        stats: behavior_stats(trace),
    };
    let Some(truth) = truth else { return Ok(report) };

    let saved_set: BTreeSet<String> = saved.iter().cloned().collect();
    report.success = Some(task_success(&saved_set, &truth.relevant_docs));
    report.ndcg10 = Some(ndcg_at_k::<f64>(&saved, &truth.relevant_docs, NDCG_DEPTH).expect("depth is positive"));

    let human = truth.human_clicks();
    if !human.is_empty() {
        let mut sim: BTreeSet<ClickKey> = BTreeSet::new();
        let mut visited: BTreeSet<String> = BTreeSet::new();
        for (e, serp) in walk(trace) {
            let Some((query, page)) = serp else { continue };
            let id = serp_id(&query, page);
            if human.iter().any(|(s, _)| *s == id) {
                visited.insert(id.clone());
                if let Some(ActionBody::Click { rank, .. }) = e.user_action.as_ref().filter(|a| !a.failed).map(|a| &a.body) {
                    sim.insert((id, *rank));
                }
            }
        }
        let on = |set: &BTreeSet<ClickKey>, id: &str| -> BTreeSet<ClickKey> {
            set.iter().filter(|(s, _)| s == id).cloned().collect()
        };
        for id in &visited {
            report.click_f1_per_serp.push(SerpClicks { serp: id.clone(), scores: click_f1(&on(&sim, id), &on(&human, id)) });
        }
        if !visited.is_empty() {
            let truth_visited: BTreeSet<ClickKey> = human.iter().filter(|(s, _)| visited.contains(s)).cloned().collect();
            report.click_f1 = Some(click_f1(&sim, &truth_visited));
        }
    }

    let references = truth.human_queries();
    if !references.is_empty() {
        for a in trace.iter().filter_map(|e| e.user_action.as_ref()).filter(|a| a.is_new_query()) {
            let ActionBody::Query { query, .. } = &a.body else { continue };
            let best = references
                .iter()
                .filter_map(|r| query_similarity(query, r, embedder).ok().map(|s| (s, r)))
                .fold(None, |acc: Option<(f64, &String)>, (s, r)| match acc {
                    Some((bs, _)) if bs >= s => acc,
                    _ => Some((s, r)),
                });
            if let Some((score, reference)) = best {
                report.query_similarity.push(QueryScore { query: query.clone(), reference: reference.clone(), score });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: Vec<RunReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_rate_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_ndcg10: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_query_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_click_f1: Option<f64>,
    pub mean_queries_per_session: f64,
    pub mean_clicks_per_query: f64,
    pub mean_session_length: f64,
}

/// Aggregates are plain means of the per-run entries.
pub fn aggregate(runs: Vec<RunReport>) -> EvalReport {
    let success = mean(runs.iter().filter_map(|r| r.success).map(|s| if s.success { 1.0 } else { 0.0 }));
    EvalReport {
        success_rate_pct: success.map(|s| s * 100.0),
        mean_ndcg10: mean(runs.iter().filter_map(|r| r.ndcg10)),
        mean_query_similarity: mean(runs.iter().filter_map(RunReport::mean_query_similarity)),
        mean_click_f1: mean(runs.iter().filter_map(|r| r.click_f1.map(|c| c.f1))),
        mean_queries_per_session: mean(runs.iter().map(|r| r.stats.queries as f64)).unwrap_or(0.0),
        mean_clicks_per_query: mean(runs.iter().map(|r| r.stats.clicks_per_query)).unwrap_or(0.0),
        mean_session_length: mean(runs.iter().map(|r| r.stats.steps as f64)).unwrap_or(0.0),
        runs,
    }
}

pub const TABLE_HEADERS: [&str; 5] = ["Run", "Task Success Rate (%)", "nDCG@10", "BERTScore (Query)", "F1-Score (Clicks)"];

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Aligned plain-text table, one row per run plus the aggregate.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<[String; 5]> = vec![TABLE_HEADERS.map(str::to_string)];
        for r in &self.runs {
            rows.push([
                r.run_id.clone(),
                cell(r.success.map(|s| if s.success { 100.0 } else { 0.0 }), 2),
                cell(r.ndcg10, 3),
                cell(r.mean_query_similarity(), 3),
                cell(r.click_f1.map(|c| c.f1), 3),
            ]);
        }
        rows.push([
            "all".to_string(),
            cell(self.success_rate_pct, 2),
            cell(self.mean_ndcg10, 3),
            cell(self.mean_query_similarity, 3),
            cell(self.mean_click_f1, 3),
        ]);
        let widths: Vec<usize> = (0..5).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
            }
        }
        let _ = writeln!(
            out,
            "\nqueries/session {:.2}  clicks/query {:.2}  session length {:.2}",
            self.mean_queries_per_session, self.mean_clicks_per_query, self.mean_session_length
        );
        out
    }
}

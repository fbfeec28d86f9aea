//! Evaluation: task success, nDCG@10, click F1, query similarity and
//! behavioral statistics over finished traces.

pub mod metrics;
pub mod report;

pub use metrics::{
    click_f1, ndcg_at_k, query_similarity, task_success, ClickKey, ClickScores, Embedder, ExactTokenEmbedder,
    MetricError, TaskSuccess,
};
pub use report::{
    aggregate, analyze_trace, behavior_stats, saved_in_order, serp_id, BehaviorStats, EvalError, EvalReport,
    GroundTruth, QueryScore, RunReport, SerpClicks, NDCG_DEPTH, TABLE_HEADERS,
};

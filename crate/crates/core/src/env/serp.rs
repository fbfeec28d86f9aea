use serde::{Deserialize, Serialize};

use super::bm25::{bm25_score, Bm25Params};
use super::corpus::CorpusIndex;
use crate::text::{tokenize, truncate_chars};

pub const DEFAULT_PAGE_SIZE: usize = 10;
pub const SNIPPET_MAX_CHARS: usize = 160;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerpResult {
    pub rank: usize,
    pub doc_id: String,
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Serp {
    pub query: String,
    pub page: usize,
    pub results: Vec<SerpResult>,
    pub total_hits: usize,
}

/// Distinct query terms in first-occurrence order.
pub fn query_terms(query: &str) -> Vec<String> {
    let mut terms: Vec<String> = Vec::new();
    for t in tokenize(query) {
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    terms
}

/// Sum of BM25 over distinct query terms for every matching document,
/// returned as `(doc index, score)` sorted by score desc then doc_id asc.
pub fn score_documents(index: &CorpusIndex, query: &str, params: Bm25Params) -> Vec<(usize, f64)> {
    let n = index.corpus_size();
    let mut scores = vec![0.0f64; n];
    let mut hit = vec![false; n];
    for term in query_terms(query) {
        let postings = index.postings(&term);
        let df = postings.len();
        for p in postings {
            scores[p.doc] += bm25_score(p.tf, df, n, index.doc_length(p.doc), index.avg_doc_length(), params);
            hit[p.doc] = true;
        }
    }
    let mut ranked: Vec<(usize, f64)> = (0..n).filter(|&i| hit[i]).map(|i| (i, scores[i])).collect();
    // Document indices follow doc_id order, so the index is the tie-break.
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

pub fn execute_query(index: &CorpusIndex, query: &str, page: usize, page_size: usize) -> Serp {
    assert!(page >= 1 && page_size >= 1, "pages and page sizes are 1-based");
    let ranked = score_documents(index, query, Bm25Params::default());
    let terms = query_terms(query);
    let first = (page - 1) * page_size;
    let results = ranked
        .iter()
        .enumerate()
        .skip(first)
        .take(page_size)
        .map(|(pos, &(doc, _))| {
            let d = index.doc(doc);
            SerpResult {
                rank: pos + 1,
                doc_id: d.doc_id.clone(),
                title: d.title.clone(),
                snippet: snippet(&d.body, &terms),
            }
        })
        .collect();
    Serp { query: query.to_string(), page, results, total_hits: ranked.len() }
}

/// The first body window (at most 160 characters, whole words) that contains
/// the largest number of distinct query terms.
pub fn snippet(body: &str, terms: &[String]) -> String {
    let words: Vec<&str> = body.split_whitespace().collect();
    if words.is_empty() {
        return String::new();
    }
    let mut best: Option<(usize, String)> = None;
    for start in 0..words.len() {
        let mut window = String::new();
        for w in &words[start..] {
            let extra = if window.is_empty() { w.chars().count() } else { w.chars().count() + 1 };
            if window.chars().count() + extra > SNIPPET_MAX_CHARS {
                break;
            }
            if !window.is_empty() {
                window.push(' ');
            }
            window.push_str(w);
        }
        if window.is_empty() {
            window = truncate_chars(words[start], SNIPPET_MAX_CHARS).to_string();
        }
        let tokens = tokenize(&window);
        let count = terms.iter().filter(|t| tokens.contains(t)).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, window));
        }
        if best.as_ref().is_some_and(|(c, _)| *c == terms.len()) {
            break;
        }
    }
    best.map(|(_, w)| w).unwrap_or_default()
}

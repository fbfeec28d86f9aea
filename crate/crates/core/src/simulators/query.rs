//! Query generation: an initial query from the need, and two reformulations
//! that draw on terms seen in documents.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SimulationState;
use crate::text::{tokenize, word_tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QueryStrategy {
    #[default]
    NeedTerms,
    AddTerm,
    ReplaceTerm,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("the information need has no terms")]
    NoNeedTerms,
    #[error("reformulation needs a previous query")]
    NoPriorQuery,
    #[error("query generation exhausted: every candidate query was already issued")]
    Exhausted,
}

pub const INITIAL_QUERY_TERMS: usize = 3;

/// Need terms ranked by frequency in the description, ties by first occurrence.
pub fn ranked_need_terms(state: &SimulationState) -> Vec<String> {
    let tokens = tokenize(&state.need.description);
    let mut ranked: Vec<(usize, usize, &String)> = state
        .need
        .need_terms
        .iter()
        .map(|t| {
            let freq = tokens.iter().filter(|x| *x == t).count();
            let first = tokens.iter().position(|x| x == t).unwrap_or(usize::MAX);
            (freq, first, t)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().map(|(_, _, t)| t.clone()).collect()
}

fn issued(state: &SimulationState, q: &str) -> bool {
    state.prior_queries().iter().any(|p| normalize(p) == normalize(q))
}

fn normalize(q: &str) -> String {
    word_tokens(q).join(" ")
}

/// Append need terms missing from `base`, one at a time, until the query is new.
fn extend_with_need_terms(state: &SimulationState, base: &[String]) -> Result<String, QueryError> {
    let mut terms = base.to_vec();
    for t in ranked_need_terms(state) {
        if terms.contains(&t) {
            continue;
        }
        terms.push(t);
        let q = terms.join(" ");
        if !issued(state, &q) {
            return Ok(q);
        }
    }
    Err(QueryError::Exhausted)
}

/// Known terms absent from `query_terms`, by count desc then alphabetically.
fn candidates<'a>(known: &'a BTreeMap<String, u32>, query_terms: &[String]) -> Vec<&'a String> {
    let mut c: Vec<(&String, u32)> =
        known.iter().filter(|(t, _)| !query_terms.contains(t)).map(|(t, n)| (t, *n)).collect();
    // BTreeMap iteration is alphabetical and the sort is stable.
    c.sort_by_key(|e| std::cmp::Reverse(e.1));
    c.into_iter().map(|(t, _)| t).collect()
}

pub fn generate_query<R: RngCore + ?Sized>(
    state: &SimulationState,
    strategy: QueryStrategy,
    _rng: &mut R,
) -> Result<String, QueryError> {
    match strategy {
        QueryStrategy::NeedTerms => {
            let ranked = ranked_need_terms(state);
            if ranked.is_empty() {
                return Err(QueryError::NoNeedTerms);
            }
            let top: Vec<String> = ranked.into_iter().take(INITIAL_QUERY_TERMS).collect();
            let q = top.join(" ");
            if issued(state, &q) {
                extend_with_need_terms(state, &top)
            } else {
                Ok(q)
            }
        }
        QueryStrategy::AddTerm => {
            let prev = word_tokens(state.last_query().ok_or(QueryError::NoPriorQuery)?);
            for c in candidates(&state.cognitive.known_terms, &prev) {
                let mut terms = prev.clone();
                terms.push(c.clone());
                let q = terms.join(" ");
                if !issued(state, &q) {
                    return Ok(q);
                }
            }
            extend_with_need_terms(state, &prev)
        }
        QueryStrategy::ReplaceTerm => {
            let prev = word_tokens(state.last_query().ok_or(QueryError::NoPriorQuery)?);
            let known = &state.cognitive.known_terms;
            // The most common term carries the least information; ties go to
            // the alphabetically first.
            let victim = prev
                .iter()
                .enumerate()
                .max_by(|a, b| {
                    let ca = known.get(a.1).copied().unwrap_or(0);
                    let cb = known.get(b.1).copied().unwrap_or(0);
                    ca.cmp(&cb).then(b.1.cmp(a.1))
                })
                .map(|(i, _)| i);
            if let Some(i) = victim {
                for c in candidates(known, &prev) {
                    let mut terms = prev.clone();
                    terms[i] = c.clone();
                    let q = terms.join(" ");
                    if !issued(state, &q) {
                        return Ok(q);
                    }
                }
            }
            extend_with_need_terms(state, &prev)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_user_action, init_state, InformationNeed, Persona, UserAction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(desc: &str) -> SimulationState {
        let persona =
            Persona { persona_id: "p".into(), patience_budget: 3, click_threshold: 0.2, reading_speed: 5.0, target_saves: 2 };
        init_state(persona, InformationNeed::from_description("t", desc), 7).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    fn with_query(s: &SimulationState, q: &str) -> SimulationState {
        apply_user_action(s, UserAction::query(q, s.step), 5.0).unwrap()
    }

    #[test]
    fn first_query_takes_top_three_need_terms() {
        let s = state("train ticket refund rules germany");
        assert_eq!(generate_query(&s, QueryStrategy::NeedTerms, &mut rng()).unwrap(), "train ticket refund");
    }

    #[test]
    fn frequency_outranks_position() {
        let s = state("refund rules: a refund for a train ticket");
        assert_eq!(generate_query(&s, QueryStrategy::NeedTerms, &mut rng()).unwrap(), "refund rules train");
    }

    #[test]
    fn add_term_uses_most_frequent_known_term() {
        let mut s = with_query(&state("train ticket refund rules germany"), "train ticket refund");
        s.cognitive.known_terms.insert("deadline".into(), 1);
        assert_eq!(generate_query(&s, QueryStrategy::AddTerm, &mut rng()).unwrap(), "train ticket refund deadline");
        s.cognitive.known_terms.insert("fare".into(), 3);
        s.cognitive.known_terms.insert("train".into(), 9);
        assert_eq!(generate_query(&s, QueryStrategy::AddTerm, &mut rng()).unwrap(), "train ticket refund fare");
    }

    #[test]
    fn replace_swaps_most_common_term() {
        let mut s = with_query(&state("train ticket refund rules germany"), "train ticket refund");
        s.cognitive.known_terms.insert("ticket".into(), 5);
        s.cognitive.known_terms.insert("fare".into(), 2);
        assert_eq!(generate_query(&s, QueryStrategy::ReplaceTerm, &mut rng()).unwrap(), "train fare refund");
    }

    #[test]
    fn repeated_queries_are_avoided_then_exhausted() {
        let s = state("rail refund");
        let q1 = generate_query(&s, QueryStrategy::NeedTerms, &mut rng()).unwrap();
        assert_eq!(q1, "rail refund");
        let s = with_query(&s, &q1);
        assert_eq!(generate_query(&s, QueryStrategy::NeedTerms, &mut rng()), Err(QueryError::Exhausted));
        assert_eq!(generate_query(&s, QueryStrategy::AddTerm, &mut rng()), Err(QueryError::Exhausted));
        let s3 = with_query(&state("a train ticket refund rules germany"), "train ticket refund");
        assert_eq!(generate_query(&s3, QueryStrategy::NeedTerms, &mut rng()).unwrap(), "train ticket refund rules");
    }

    #[test]
    fn reformulation_needs_prior_query() {
        let s = state("rail refund");
        assert_eq!(generate_query(&s, QueryStrategy::AddTerm, &mut rng()), Err(QueryError::NoPriorQuery));
    }

    #[test]
    fn deterministic() {
        let mut s = with_query(&state("train ticket refund rules germany"), "train ticket refund");
        s.cognitive.known_terms.insert("b".into(), 1);
        s.cognitive.known_terms.insert("a".into(), 1);
        let a = generate_query(&s, QueryStrategy::AddTerm, &mut rng()).unwrap();
        assert_eq!(a, generate_query(&s, QueryStrategy::AddTerm, &mut rng()).unwrap());
        assert_eq!(a, "train ticket refund a");
    }
}

mod common;

use std::sync::OnceLock;

use proptest::prelude::*;

use searchsim_core::env::{
    apply_command, execute_query, ingest_corpus, render_page, Control, CorpusFormat, CorpusIndex, EnvState, SitePage,
};
use searchsim_core::iface::{
    bundled_recipe, ground_action, match_in_scope, match_selector, names, parse_markup, perceive, BrowserCommand,
    CommandKind, PerceptionMode, SemanticAction, Target,
};

fn index() -> &'static CorpusIndex {
    static INDEX: OnceLock<CorpusIndex> = OnceLock::new();
    INDEX.get_or_init(|| {
        ingest_corpus(std::fs::File::open(common::fixture("corpus.jsonl")).unwrap(), CorpusFormat::Jsonl).unwrap()
    })
}

const WORDS: [&str; 8] = ["train", "ticket", "refund", "reimbursement", "castle", "a&b", "<seat>", "zzz"];

/// A walk step: which control to use (modulo the page's controls), the
/// query words for fills, and a few bare commands.
fn walk() -> impl Strategy<Value = Vec<(u8, Vec<u8>)>> {
    prop::collection::vec((any::<u8>(), prop::collection::vec(0u8..8, 1..4)), 1..40)
}

fn command(env: &EnvState, site: &str, pick: u8, words: &[u8]) -> BrowserCommand {
    let page = render_page(env, index(), site).unwrap();
    match pick % 16 {
        0 => BrowserCommand::bare(CommandKind::Back),
        1 => BrowserCommand::bare(CommandKind::Save),
        _ => {
            let (node, control) = page.controls[usize::from(pick) % page.controls.len()].clone();
            match control {
                Control::QueryInput => {
                    let q: Vec<&str> = words.iter().map(|w| WORDS[usize::from(*w)]).collect();
                    BrowserCommand { kind: CommandKind::FillNode, node_ref: Some(node), text: Some(q.join(" ")) }
                }
                _ => BrowserCommand { kind: CommandKind::ClickNode, node_ref: Some(node), text: None },
            }
        }
    }
}

fn page_key(env: &EnvState) -> (SitePage, Option<(String, usize)>, Option<String>) {
    (env.current_page, env.current_serp.as_ref().map(|s| (s.query.clone(), s.page)), env.current_doc.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perception_reconstructs_every_reachable_state(steps in walk(), cards in any::<bool>()) {
        let site = if cards { "simsearch-cards" } else { "simsearch-classic" };
        let recipe = bundled_recipe(site).unwrap();
        let mut env = EnvState::start();
        for (pick, words) in &steps {
            if let Ok(t) = apply_command(index(), &env, &command(&env, site, *pick, words), site, 10) {
                env = t.env;
            }
            let dom = parse_markup(&render_page(&env, index(), site).unwrap().markup);
            let p = perceive(&dom, &recipe, PerceptionMode::Strict).unwrap().state;
            prop_assert_eq!(p.element(names::QUERY_BOX).map(|e| e.value.as_str()), Some(env.query_input.as_str()));
            let results = env.current_serp.as_ref().filter(|_| env.current_page == SitePage::SerpPage).map_or(&[][..], |s| &s.results[..]);
            prop_assert_eq!(p.list(names::RESULTS).len(), results.len());
            for (i, r) in results.iter().enumerate() {
                let rank = r.rank.to_string();
                prop_assert_eq!(p.field(names::RESULTS, i + 1, names::F_RANK), Some(rank.as_str()));
                prop_assert_eq!(p.field(names::RESULTS, i + 1, names::F_TITLE), Some(r.title.as_str()));
                prop_assert_eq!(p.field(names::RESULTS, i + 1, names::F_DOC_ID), Some(r.doc_id.as_str()));
            }
        }
    }

    #[test]
    fn back_only_returns_to_visited_pages(steps in walk()) {
        let site = "simsearch-classic";
        let mut env = EnvState::start();
        let mut visited = vec![page_key(&env)];
        for (pick, words) in &steps {
            let cmd = command(&env, site, *pick, words);
            if let Ok(t) = apply_command(index(), &env, &cmd, site, 10) {
                env = t.env;
                if cmd.kind == CommandKind::Back {
                    prop_assert!(visited.contains(&page_key(&env)), "back led to {:?}", page_key(&env));
                }
                visited.push(page_key(&env));
            }
        }
    }

    #[test]
    fn grounded_commands_point_at_recipe_matches(steps in walk(), rank in 1usize..12) {
        let site = "simsearch-classic";
        let recipe = bundled_recipe(site).unwrap();
        let mut env = EnvState::start();
        let actions = [
            SemanticAction::fill(names::QUERY_BOX, "train refund"),
            SemanticAction::click_element(names::SEARCH_BUTTON),
            SemanticAction::click_element(names::NEXT_PAGE),
            SemanticAction::click_element(names::SAVE_BUTTON),
            SemanticAction::click_element(names::BACK_LINK),
            SemanticAction::click(Target::Item { list: names::RESULTS.into(), rank, field: names::F_LINK.into() }),
        ];
        for (pick, words) in &steps {
            let dom = parse_markup(&render_page(&env, index(), site).unwrap().markup);
            for a in &actions {
                if let Ok(cmd) = ground_action(a, &dom, &recipe) {
                    let node = cmd.node_ref.unwrap();
                    let ok = match a.target.as_ref().unwrap() {
                        Target::Element(name) => match_selector(&dom, &recipe.elements[name].selector).contains(&node),
                        Target::Item { list, field, .. } => {
                            let spec = &recipe.lists[list];
                            match_selector(&dom, &spec.selector)
                                .into_iter()
                                .any(|item| match_in_scope(&dom, &spec.fields[field].selector, item).contains(&node))
                        }
                    };
                    prop_assert!(ok, "{} grounded to node {} outside its selector", a, node);
                }
            }
            if let Ok(t) = apply_command(index(), &env, &command(&env, site, *pick, words), site, 10) {
                env = t.env;
            }
        }
    }

    #[test]
    fn execute_query_is_pure(words in prop::collection::vec(0u8..8, 1..4), page in 1usize..4) {
        let q: Vec<&str> = words.iter().map(|w| WORDS[usize::from(*w)]).collect();
        let q = q.join(" ");
        let a = serde_json::to_string(&execute_query(index(), &q, page, 10)).unwrap();
        let b = serde_json::to_string(&execute_query(index(), &q, page, 10)).unwrap();
        prop_assert_eq!(a, b);
    }
}

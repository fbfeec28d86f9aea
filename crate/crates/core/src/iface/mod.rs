//! Declarative interface abstraction: recipes, markup parsing, selector
//! resolution, perception and action grounding.

pub mod dom;
pub mod ground;
pub mod perceive;
pub mod recipe;
pub mod selector;

pub use dom::{parse_markup, DomTree, NodeRef};
pub use ground::{
    ground_action, resolve_target, validate_action, BrowserCommand, CommandKind, GroundError, SemanticAction, Target,
    Verb,
};
pub use perceive::{perceive, PageKind, PerceiveError, PerceivedElement, PerceivedState, Perception, PerceptionMode};
pub use recipe::{bundled_recipe, bundled_recipe_ids, parse_recipe, Recipe, RecipeError};
pub use selector::{match_in_scope, match_selector, Selector, SelectorError};

/// Semantic names the engine relies on. Recipes targeting the simulated
/// environment (or any site driven by the built-in components) define these.
pub mod names {
    pub const QUERY_BOX: &str = "query_box";
    pub const SEARCH_BUTTON: &str = "search_button";
    pub const RESULT_STATS: &str = "result_stats";
    pub const NEXT_PAGE: &str = "next_page";
    pub const DOC_TITLE: &str = "doc_title";
    pub const DOC_REF: &str = "doc_ref";
    pub const DOC_BODY: &str = "doc_body";
    pub const SAVE_BUTTON: &str = "save_button";
    pub const BACK_LINK: &str = "back_link";
    pub const SAVED_FLAG: &str = "saved_flag";

    pub const RESULTS: &str = "results";
    pub const F_TITLE: &str = "title";
    pub const F_LINK: &str = "link";
    pub const F_DOC_ID: &str = "doc_id";
    pub const F_SNIPPET: &str = "snippet";
    pub const F_RANK: &str = "rank";
}

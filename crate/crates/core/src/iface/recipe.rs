//! Recipes: human-readable maps from UI elements to stable semantic names.
//!
//! A recipe is a JSON document:
//!
//! ```json
//! {
//!   "recipe_id": "simsearch-classic",
//!   "version": 1,
//!   "elements": { "search_button": { "selector": "button#go", "role": "button", "action": "click" } },
//!   "lists": {
//!     "results": {
//!       "selector": "ol#results li.result",
//!       "fields": { "link": { "selector": "a.link", "attribute": "href", "action": "click" } }
//!     }
//!   }
//! }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use super::selector::Selector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Input,
    Button,
    Link,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryAction {
    Click,
    Fill,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub selector: Selector,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<EntryAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub selector: Selector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<EntryAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListSpec {
    pub selector: Selector,
    #[serde(deserialize_with = "unique_keys")]
    pub fields: BTreeMap<String, FieldSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub recipe_id: String,
    pub version: u32,
    #[serde(default, deserialize_with = "unique_keys")]
    pub elements: BTreeMap<String, ElementSpec>,
    #[serde(default, deserialize_with = "unique_keys")]
    pub lists: BTreeMap<String, ListSpec>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecipeError {
    #[error("recipe syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("duplicate semantic name \"{0}\"")]
    DuplicateName(String),
    #[error("entry \"{name}\": action {action:?} is incompatible with role {role:?}")]
    RoleMismatch { name: String, role: Role, action: EntryAction },
    #[error("list \"{list}\" field \"{field}\": only click actions are allowed on list fields")]
    FieldAction { list: String, field: String },
}

const DUPLICATE_MARKER: &str = "duplicate semantic name: ";

/// Deserialize a map while rejecting repeated keys, which a plain map would
/// silently overwrite.
fn unique_keys<'de, D, V>(d: D) -> Result<BTreeMap<String, V>, D::Error>
where
    D: Deserializer<'de>,
    V: Deserialize<'de>,
{
    struct UniqueVisitor<V>(PhantomData<V>);

    impl<'de, V: Deserialize<'de>> Visitor<'de> for UniqueVisitor<V> {
        type Value = BTreeMap<String, V>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a map of semantic names")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((key, value)) = access.next_entry::<String, V>()? {
                if out.contains_key(&key) {
                    return Err(serde::de::Error::custom(format!("{DUPLICATE_MARKER}{key}")));
                }
                out.insert(key, value);
            }
            Ok(out)
        }
    }

    d.deserialize_map(UniqueVisitor(PhantomData))
}

pub fn parse_recipe(source: &str) -> Result<Recipe, RecipeError> {
    let recipe: Recipe = serde_json::from_str(source).map_err(|e| {
        let message = e.to_string();
        match message.find(DUPLICATE_MARKER) {
            Some(i) => {
                let rest = &message[i + DUPLICATE_MARKER.len()..];
                let name = rest.split(" at line").next().unwrap_or(rest);
                RecipeError::DuplicateName(name.to_string())
            }
            None => RecipeError::Syntax { line: e.line(), column: e.column(), message },
        }
    })?;
    recipe.validate()?;
    Ok(recipe)
}

impl Recipe {
    pub fn validate(&self) -> Result<(), RecipeError> {
        if let Some(name) = self.elements.keys().find(|k| self.lists.contains_key(*k)) {
            return Err(RecipeError::DuplicateName(name.clone()));
        }
        for (name, el) in &self.elements {
            if let Some(action) = el.action {
                let ok = match action {
                    EntryAction::Fill => el.role == Role::Input,
                    EntryAction::Click => matches!(el.role, Role::Button | Role::Link),
                };
                if !ok {
                    return Err(RecipeError::RoleMismatch { name: name.clone(), role: el.role, action });
                }
            }
        }
        for (list, spec) in &self.lists {
            for (field, f) in &spec.fields {
                if f.action == Some(EntryAction::Fill) {
                    return Err(RecipeError::FieldAction { list: list.clone(), field: field.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recipe serializes")
    }
}

/// Recipes shipped with the crate, one per renderable theme.
pub fn bundled_recipe_sources() -> [(&'static str, &'static str); 2] {
    [
        ("simsearch-classic", include_str!("../../recipes/simsearch-classic.json")),
        ("simsearch-cards", include_str!("../../recipes/simsearch-cards.json")),
    ]
}

pub fn bundled_recipe(recipe_id: &str) -> Option<Recipe> {
    bundled_recipe_sources()
        .into_iter()
        .find(|(id, _)| *id == recipe_id)
        .map(|(_, src)| parse_recipe(src).expect("bundled recipes are valid"))
}

pub fn bundled_recipe_ids() -> Vec<&'static str> {
    bundled_recipe_sources().into_iter().map(|(id, _)| id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn div_mapped_to_search_button() {
        let r = parse_recipe(
            r#"{"recipe_id":"t","version":1,"elements":{"search_button":{"selector":"div.go","role":"button","action":"click"}}}"#,
        )
        .unwrap();
        assert_eq!(r.elements.len(), 1);
        let el = &r.elements["search_button"];
        assert_eq!(el.role, Role::Button);
        assert_eq!(el.selector.compounds[0].tag.as_deref(), Some("div"));
    }

    #[test]
    fn empty_recipe_is_valid() {
        let r = parse_recipe(r#"{"recipe_id":"e","version":1,"elements":{},"lists":{}}"#).unwrap();
        assert!(r.elements.is_empty() && r.lists.is_empty());
    }

    #[test]
    fn duplicate_names_rejected() {
        let src = r#"{"recipe_id":"d","version":1,"lists":{
            "results":{"selector":"li","fields":{}},
            "results":{"selector":"li","fields":{}}}}"#;
        assert_eq!(parse_recipe(src), Err(RecipeError::DuplicateName("results".into())));
        let cross = r#"{"recipe_id":"d","version":1,
            "elements":{"results":{"selector":"p","role":"text"}},
            "lists":{"results":{"selector":"li","fields":{}}}}"#;
        assert_eq!(parse_recipe(cross), Err(RecipeError::DuplicateName("results".into())));
    }

    #[test]
    fn role_action_mismatch_rejected() {
        let src = r#"{"recipe_id":"m","version":1,"elements":{"q":{"selector":"input","role":"button","action":"fill"}}}"#;
        assert!(matches!(parse_recipe(src), Err(RecipeError::RoleMismatch { .. })));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_recipe("{\n  \"recipe_id\": \"x\",\n  \"version\": oops\n}").unwrap_err();
        match err {
            RecipeError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad_selector =
            r#"{"recipe_id":"x","version":1,"elements":{"a":{"selector":"a > b","role":"link"}}}"#;
        assert!(matches!(parse_recipe(bad_selector), Err(RecipeError::Syntax { .. })));
    }

    #[test]
    fn bundled_recipes_parse() {
        for id in bundled_recipe_ids() {
            let r = bundled_recipe(id).unwrap();
            assert_eq!(r.recipe_id, id);
            assert!(r.lists.contains_key("results"));
        }
    }
}

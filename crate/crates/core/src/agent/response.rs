//! Capability kinds, structured provider responses and their parser.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::iface::SemanticAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CapabilityKind {
    Perceive,
    Plan,
    Act,
    Reflect,
    Wonder,
}

impl CapabilityKind {
    pub const ALL: [CapabilityKind; 5] =
        [CapabilityKind::Perceive, CapabilityKind::Plan, CapabilityKind::Act, CapabilityKind::Reflect, CapabilityKind::Wonder];

    pub fn name(self) -> &'static str {
        match self {
            CapabilityKind::Perceive => "perceive",
            CapabilityKind::Plan => "plan",
            CapabilityKind::Act => "act",
            CapabilityKind::Reflect => "reflect",
            CapabilityKind::Wonder => "wonder",
        }
    }

    pub fn schema_id(self) -> SchemaId {
        match self {
            CapabilityKind::Perceive => SchemaId::Perceive,
            CapabilityKind::Plan => SchemaId::Plan,
            CapabilityKind::Act => SchemaId::Act,
            CapabilityKind::Reflect => SchemaId::Reflect,
            CapabilityKind::Wonder => SchemaId::Wonder,
        }
    }
}

impl fmt::Display for CapabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Expected shape of a provider response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemaId {
    #[serde(rename = "perceive.v1")]
    Perceive,
    #[serde(rename = "plan.v1")]
    Plan,
    #[serde(rename = "act.v1")]
    Act,
    #[serde(rename = "reflect.v1")]
    Reflect,
    #[serde(rename = "wonder.v1")]
    Wonder,
    /// Component choice made by the prompt-reasoned policy.
    #[serde(rename = "select.v1")]
    Select,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderRequest {
    /// `None` for component-selection requests.
    pub capability: Option<CapabilityKind>,
    pub prompt: String,
    pub schema_id: SchemaId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum CapabilityResult {
    Summary(String),
    SubGoals(Vec<String>),
    Action(SemanticAction),
    Adjustment(String),
    Questions(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityOutput {
    pub capability: CapabilityKind,
    pub thoughts: String,
    pub reflections: Option<String>,
    pub result: CapabilityResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub thoughts: String,
    pub reflections: String,
    pub chosen_component: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unparseable {schema:?} response: {message}")]
pub struct ParseError {
    pub schema: SchemaId,
    pub message: String,
    /// The provider's text, kept for the trace.
    pub raw: String,
}

/// Either a capability output or a component selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Parsed {
    Capability(CapabilityOutput),
    Selection(Selection),
}

fn required_str(obj: &Map<String, Value>, key: &str) -> Result<String, String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("field \"{key}\" must be a string")),
        None => Err(format!("missing required field \"{key}\"")),
    }
}

fn optional_str(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("field \"{key}\" must be a string")),
    }
}

fn string_list(obj: &Map<String, Value>, key: &str) -> Result<Vec<String>, String> {
    match obj.get(key) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| format!("\"{key}\" must hold strings")))
            .collect(),
        Some(_) => Err(format!("field \"{key}\" must be a list")),
        None => Err(format!("missing required field \"{key}\"")),
    }
}

/// Strict parse of one structured response. Unknown extra fields are
/// ignored; required fields depend on the schema.
pub fn parse_structured_response(raw: &str, schema: SchemaId) -> Result<Parsed, ParseError> {
    let fail = |message: String| ParseError { schema, message, raw: raw.to_string() };
    let value: Value = serde_json::from_str(raw.trim()).map_err(|e| fail(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(fail("response must be an object".into()));
    };
    let thoughts = required_str(&obj, "thoughts").map_err(&fail)?;
    let reflections = optional_str(&obj, "reflections").map_err(&fail)?;
    let capability = |kind: CapabilityKind, result: CapabilityResult| {
        Parsed::Capability(CapabilityOutput { capability: kind, thoughts: thoughts.clone(), reflections: reflections.clone(), result })
    };
    Ok(match schema {
        SchemaId::Perceive => {
            capability(CapabilityKind::Perceive, CapabilityResult::Summary(required_str(&obj, "summary").map_err(&fail)?))
        }
        SchemaId::Plan => {
            capability(CapabilityKind::Plan, CapabilityResult::SubGoals(string_list(&obj, "sub_goals").map_err(&fail)?))
        }
        SchemaId::Reflect => capability(
            CapabilityKind::Reflect,
            CapabilityResult::Adjustment(required_str(&obj, "adjustment").map_err(&fail)?),
        ),
        SchemaId::Wonder => capability(
            CapabilityKind::Wonder,
            CapabilityResult::Questions(string_list(&obj, "questions").map_err(&fail)?),
        ),
        SchemaId::Act => {
            let action = obj.get("action").ok_or_else(|| fail("missing required field \"action\"".into()))?;
            let action: SemanticAction =
                serde_json::from_value(action.clone()).map_err(|e| fail(format!("invalid action: {e}")))?;
            action.check_shape().map_err(|e| fail(e.to_string()))?;
            capability(CapabilityKind::Act, CapabilityResult::Action(action))
        }
        SchemaId::Select => Parsed::Selection(Selection {
            thoughts: thoughts.clone(),
            reflections: reflections.clone().ok_or_else(|| fail("missing required field \"reflections\"".into()))?,
            chosen_component: required_str(&obj, "chosen_component").map_err(&fail)?,
        }),
    })
}

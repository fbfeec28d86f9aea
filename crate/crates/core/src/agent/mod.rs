//! The cognitive agent: five capabilities behind a pluggable model provider.

pub mod invoke;
pub mod prompt;
pub mod provider;
pub mod response;

pub use invoke::{build_capability_request, call_provider, invoke_capability, remember, AgentEnv, CapabilityError};
pub use prompt::{AgentMemory, PromptContext, PromptLimits, PromptSet};
#[cfg(feature = "remote")]
pub use provider::RemoteProvider;
pub use provider::{Provider, ProviderError, Script, ScriptEntry, ScriptedProvider};
pub use response::{
    parse_structured_response, CapabilityKind, CapabilityOutput, CapabilityResult, ParseError, Parsed, ProviderRequest,
    SchemaId, Selection,
};

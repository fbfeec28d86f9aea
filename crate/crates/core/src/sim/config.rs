//! Run configuration and its resolution into ready-to-run parts.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{PromptLimits, PromptSet, Provider, Script, ScriptedProvider};
use crate::env::{ingest_corpus, theme_ids, CorpusFormat, CorpusIndex, DEFAULT_PAGE_SIZE, THEME_CLASSIC};
use crate::iface::{bundled_recipe, parse_recipe, Recipe};
use crate::logs::read_judgments;
use crate::model::{CognitiveParams, CostModel, InformationNeed, Persona};
use crate::policy::{parse_rules, AgenticPolicy, Forest, LearnedPolicy, Policy};
use crate::simulators::{ids, ClickModelParams, QueryStrategy, Registry, StopRule};

/// Field-level configuration problem.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError { field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedSpec {
    pub task_id: String,
    pub description: String,
    /// Derived from the description when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub need_terms: Option<Vec<String>>,
}

impl NeedSpec {
    pub fn to_need(&self) -> InformationNeed {
        match &self.need_terms {
            Some(terms) => InformationNeed {
                task_id: self.task_id.clone(),
                description: self.description.clone(),
                need_terms: terms.clone(),
            },
            None => InformationNeed::from_description(&self.task_id, &self.description),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    OrisS {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rules_file: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rules: Option<String>,
    },
    OrisMl {
        model_file: String,
    },
    OrisA {
        #[serde(default = "default_agentic_fallback")]
        default: String,
    },
}

fn default_agentic_fallback() -> String {
    ids::RELEVANCE_DECISION.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProviderSpec {
    #[default]
    None,
    Scripted {
        script_file: String,
    },
    /// Endpoint and token come from the environment, never the config.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComponentParams {
    pub click_model: ClickModelParams,
    pub stop_rule: StopRule,
    pub query_strategy: QueryStrategy,
    pub refine_strategy: QueryStrategy,
}

impl Default for ComponentParams {
    fn default() -> Self {
        ComponentParams {
            click_model: ClickModelParams::threshold(),
            stop_rule: StopRule::default(),
            query_strategy: QueryStrategy::NeedTerms,
            refine_strategy: QueryStrategy::AddTerm,
        }
    }
}

fn default_max_steps() -> u64 {
    60
}

fn default_site() -> String {
    THEME_CLASSIC.to_string()
}

fn default_page_size() -> usize {
    DEFAULT_PAGE_SIZE
}

fn jsonl() -> CorpusFormat {
    CorpusFormat::Jsonl
}

/// A run as a researcher writes it. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub persona: Persona,
    pub need: NeedSpec,
    pub corpus: String,
    #[serde(default = "jsonl")]
    pub corpus_format: CorpusFormat,
    /// Judgments file; when absent the corpus grades are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgments: Option<String>,
    /// Theme of the simulated site.
    #[serde(default = "default_site")]
    pub site: String,
    /// Bundled recipe id or recipe file; defaults to the site's own recipe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<String>,
    pub policy: PolicySpec,
    #[serde(default)]
    pub components: ComponentParams,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub provider: ProviderSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts_dir: Option<String>,
    #[serde(default)]
    pub prompt_limits: PromptLimits,
    #[serde(default)]
    pub costs: CostModel,
    #[serde(default)]
    pub cognitive: CognitiveParams,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    /// Where `searchsim run` writes the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            // A missing field is reported at its parent; name the field itself.
            let field = match inner.split('`').nth(1).filter(|_| inner.starts_with("missing field")) {
                Some(f) if path == "." => f.to_string(),
                Some(f) => format!("{path}.{f}"),
                None if path == "." => "config".to_string(),
                None => path,
            };
            ConfigError { field, message: inner }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Copy with every path made absolute, for storing next to a run.
    pub fn absolutized(&self) -> RunConfig {
        let abs = |p: &String| self.resolve_path(p).to_string_lossy().into_owned();
        let mut out = self.clone();
        out.corpus = abs(&self.corpus);
        out.judgments = self.judgments.as_ref().map(abs);
        if let Some(r) = &self.recipe {
            if bundled_recipe(r).is_none() {
                out.recipe = Some(abs(r));
            }
        }
        out.policy = match &self.policy {
            PolicySpec::OrisS { rules_file, rules } => {
                PolicySpec::OrisS { rules_file: rules_file.as_ref().map(abs), rules: rules.clone() }
            }
            PolicySpec::OrisMl { model_file } => PolicySpec::OrisMl { model_file: abs(model_file) },
            other => other.clone(),
        };
        out.provider = match &self.provider {
            ProviderSpec::Scripted { script_file } => ProviderSpec::Scripted { script_file: abs(script_file) },
            other => other.clone(),
        };
        out.prompts_dir = self.prompts_dir.as_ref().map(abs);
        out.output = self.output.as_ref().map(abs);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Everything a run needs, loaded and checked.
#[derive(Clone)]
pub struct PreparedRun {
    pub config: RunConfig,
    pub index: Arc<CorpusIndex>,
    pub recipe: Recipe,
    pub policy: Policy,
    pub registry: Registry,
    pub provider: Option<Arc<dyn Provider>>,
    pub prompts: PromptSet,
    /// doc_id -> grade for the run's task.
    pub grades: BTreeMap<String, u8>,
}

impl std::fmt::Debug for PreparedRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreparedRun").field("config", &self.config).finish_non_exhaustive()
    }
}

fn read_text(cfg: &RunConfig, field: &str, p: &str) -> Result<String, ConfigError> {
    let path = cfg.resolve_path(p);
    std::fs::read_to_string(&path).map_err(|e| ConfigError::new(field, format!("cannot read {}: {e}", path.display())))
}

pub fn load_recipe(cfg: &RunConfig) -> Result<Recipe, ConfigError> {
    let id = cfg.recipe.clone().unwrap_or_else(|| cfg.site.clone());
    if let Some(r) = bundled_recipe(&id) {
        return Ok(r);
    }
    parse_recipe(&read_text(cfg, "recipe", &id)?).map_err(|e| ConfigError::new("recipe", e.to_string()))
}

pub fn load_corpus(cfg: &RunConfig) -> Result<CorpusIndex, ConfigError> {
    let path = cfg.resolve_path(&cfg.corpus);
    let file = File::open(&path).map_err(|e| ConfigError::new("corpus", format!("cannot open {}: {e}", path.display())))?;
    ingest_corpus(file, cfg.corpus_format).map_err(|e| ConfigError::new("corpus", e.to_string()))
}

pub fn load_policy(cfg: &RunConfig, registry: &Registry) -> Result<Policy, ConfigError> {
    let policy = match &cfg.policy {
        PolicySpec::OrisS { rules_file, rules } => {
            let source = match (rules_file, rules) {
                (Some(f), None) => read_text(cfg, "policy.rules_file", f)?,
                (None, Some(r)) => r.clone(),
                _ => return Err(ConfigError::new("policy", "give exactly one of rules_file or rules")),
            };
            Policy::Rules(parse_rules(&source).map_err(|e| ConfigError::new("policy.rules", e.to_string()))?)
        }
        PolicySpec::OrisMl { model_file } => {
            let forest = Forest::from_json(&read_text(cfg, "policy.model_file", model_file)?)
                .map_err(|e| ConfigError::new("policy.model_file", e.to_string()))?;
            Policy::Learned(LearnedPolicy { classifier: Arc::new(forest) })
        }
        PolicySpec::OrisA { default } => Policy::Agentic(AgenticPolicy { default: default.clone() }),
    };
    policy.check_components(registry).map_err(|e| ConfigError::new("policy", e.to_string()))?;
    Ok(policy)
}

pub fn load_provider(cfg: &RunConfig) -> Result<Option<Arc<dyn Provider>>, ConfigError> {
    match &cfg.provider {
        ProviderSpec::None => Ok(None),
        ProviderSpec::Scripted { script_file } => {
            let script = Script::parse(&read_text(cfg, "provider.script_file", script_file)?)
                .map_err(|e| ConfigError::new("provider.script_file", e.to_string()))?;
            Ok(Some(Arc::new(ScriptedProvider::new(script))))
        }
        #[cfg(feature = "remote")]
        ProviderSpec::Remote => Ok(Some(Arc::new(
            crate::agent::RemoteProvider::from_env().map_err(|e| ConfigError::new("provider", e.to_string()))?,
        ))),
        #[cfg(not(feature = "remote"))]
        ProviderSpec::Remote => Err(ConfigError::new("provider", "this build has no remote provider (feature `remote`)")),
    }
}

fn load_grades(cfg: &RunConfig, index: &CorpusIndex) -> Result<BTreeMap<String, u8>, ConfigError> {
    match &cfg.judgments {
        Some(p) => {
            let path = cfg.resolve_path(p);
            let file =
                File::open(&path).map_err(|e| ConfigError::new("judgments", format!("cannot open {}: {e}", path.display())))?;
            let all = read_judgments(file).map_err(|e| ConfigError::new("judgments", e.to_string()))?;
            Ok(all.into_iter().filter(|j| j.task_id == cfg.need.task_id).map(|j| (j.doc_id, j.grade)).collect())
        }
        None => Ok(index
            .documents()
            .iter()
            .filter_map(|d| d.judged_relevance.map(|g| (d.doc_id.clone(), g)))
            .collect()),
    }
}

/// Validate every field and load every referenced file.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedRun, ConfigError> {
    cfg.persona.validate().map_err(|e| ConfigError::new("persona", e.to_string()))?;
    cfg.need.to_need().validate().map_err(|e| ConfigError::new("need", e.to_string()))?;
    if cfg.max_steps < 1 {
        return Err(ConfigError::new("max_steps", "must be at least 1"));
    }
    if cfg.page_size < 1 {
        return Err(ConfigError::new("page_size", "must be at least 1"));
    }
    if !theme_ids().contains(&cfg.site.as_str()) {
        return Err(ConfigError::new("site", format!("unknown site theme; known: {}", theme_ids().join(", "))));
    }
    cfg.components.stop_rule.validate().map_err(|e| ConfigError::new("components.stop_rule", e))?;
    cfg.components.click_model.validate().map_err(|e| ConfigError::new("components.click_model", e.to_string()))?;
    let registry = Registry::builtin();
    let recipe = load_recipe(cfg)?;
    let index = load_corpus(cfg)?;
    let grades = load_grades(cfg, &index)?;
    let policy = load_policy(cfg, &registry)?;
    let provider = load_provider(cfg)?;
    let needs_provider = matches!(policy, Policy::Agentic(_))
        || policy.static_components().iter().any(|c| c.starts_with("Agent"));
    if needs_provider && provider.is_none() {
        return Err(ConfigError::new("provider", "this policy can invoke the agent but no provider is configured"));
    }
    let prompts = match &cfg.prompts_dir {
        Some(d) => PromptSet::with_overrides(&cfg.resolve_path(d))
            .map_err(|e| ConfigError::new("prompts_dir", e.to_string()))?,
        None => PromptSet::default(),
    };
    Ok(PreparedRun { config: cfg.clone(), index: Arc::new(index), recipe, policy, registry, provider, prompts, grades })
}

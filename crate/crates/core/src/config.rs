//! Run configuration: a YAML (or JSON) document with an `apis` section
//! describing providers and a `workflow` section assigning roles.
//!
//! `${NAME}` references inside `apis` are substituted from a `.env` file
//! next to the config plus the caller-supplied environment (which wins).
//! `temperature` and `max_tokens` never default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use crate::error::{Error, Result};

pub const DEFAULT_CHARS_PER_TOKEN_RATIO: f64 = 0.25;
pub const DEFAULT_OPENAI_CONTEXT_LIMIT: u64 = 16_000;
pub const DEFAULT_ANTHROPIC_CONTEXT_LIMIT: u64 = 200_000;
pub const DEFAULT_REPLAY_CONTEXT_LIMIT: u64 = 200_000;
pub const DEFAULT_SAFETY_MARGIN: f64 = 0.75;
pub const REDACTED: &str = "<redacted>";

/// Name of the optional environment file read from the config's directory.
pub const ENV_FILE_NAME: &str = ".env";

pub type EnvMap = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProviderKind {
    #[serde(rename = "openai-chat")]
    OpenAiChat,
    #[serde(rename = "anthropic-messages")]
    AnthropicMessages,
    #[serde(rename = "replay")]
    Replay,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::OpenAiChat => "openai-chat",
            ProviderKind::AnthropicMessages => "anthropic-messages",
            ProviderKind::Replay => "replay",
        }
    }

    pub fn default_context_limit(self) -> u64 {
        match self {
            ProviderKind::OpenAiChat => DEFAULT_OPENAI_CONTEXT_LIMIT,
            ProviderKind::AnthropicMessages => DEFAULT_ANTHROPIC_CONTEXT_LIMIT,
            ProviderKind::Replay => DEFAULT_REPLAY_CONTEXT_LIMIT,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "openai-chat" => Some(ProviderKind::OpenAiChat),
            "anthropic-messages" => Some(ProviderKind::AnthropicMessages),
            "replay" => Some(ProviderKind::Replay),
            _ => None,
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry of the `apis` section after substitution and validation.
///
/// For `replay` providers `base_url` holds the fixture directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderSettings {
    pub id: String,
    pub kind: ProviderKind,
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub context_limit_tokens: u64,
    pub chars_per_token_ratio: f64,
    pub anthropic_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(1000),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Wait inserted before `attempt` (1-based). The first attempt never waits.
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        let factor = self.multiplier.powi(attempt as i32 - 2);
        self.base_delay.mul_f64(factor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPaths {
    pub phase1: PathBuf,
    pub phase2: PathBuf,
    pub phase3: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowConfig {
    pub analyst_a: String,
    pub analyst_b: String,
    pub arbitrator: String,
    pub prompts: PromptPaths,
    pub retry: RetryPolicy,
    pub safety_margin: f64,
    pub results_root: PathBuf,
    pub exclude_dirs: Vec<String>,
}

/// A fully validated configuration. Providers are ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub providers: Vec<ProviderSettings>,
    pub workflow: WorkflowConfig,
}

impl Config {
    pub fn provider(&self, id: &str) -> Option<&ProviderSettings> {
        self.providers.iter().find(|p| p.id == id)
    }

    pub fn analyst_a(&self) -> &ProviderSettings {
        self.role_provider(&self.workflow.analyst_a)
    }

    pub fn analyst_b(&self) -> &ProviderSettings {
        self.role_provider(&self.workflow.analyst_b)
    }

    pub fn arbitrator(&self) -> &ProviderSettings {
        self.role_provider(&self.workflow.arbitrator)
    }

    fn role_provider(&self, id: &str) -> &ProviderSettings {
        // role ids are resolved during validation
        self.provider(id).expect("role id validated at load time")
    }

    /// Copy with every non-empty API key replaced by a placeholder.
    pub fn redacted(&self) -> Config {
        let mut out = self.clone();
        for p in &mut out.providers {
            if !p.api_key.is_empty() {
                p.api_key = REDACTED.to_string();
            }
        }
        out
    }

    /// Forces every provider to the replay kind, reading fixtures from `dir`.
    pub fn with_replay(&self, dir: &Path) -> Config {
        let mut out = self.clone();
        for p in &mut out.providers {
            p.kind = ProviderKind::Replay;
            p.base_url = dir.to_string_lossy().into_owned();
        }
        out
    }

    /// Canonical YAML rendering with secrets redacted and paths absolute.
    pub fn to_snapshot_yaml(&self) -> Result<String> {
        let redacted = self.redacted();
        let raw = RawConfig::from_config(&redacted);
        serde_yaml::to_string(&raw)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}

fn env_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$\{([A-Z0-9_]+)\}").expect("static regex"))
}

/// Replaces every `${NAME}` with its value from `env`.
///
/// An undefined name is an error; it is never replaced by an empty string.
pub fn substitute_env(text: &str, env: &EnvMap) -> Result<String> {
    let missing: BTreeSet<&str> = env_pattern()
        .captures_iter(text)
        .map(|c| c.get(1).expect("group").as_str())
        .filter(|name| !env.contains_key(*name))
        .collect();
    if !missing.is_empty() {
        let names: Vec<&str> = missing.into_iter().collect();
        return Err(Error::Config(format!(
            "undefined environment variable(s): {}",
            names.join(", ")
        )));
    }
    Ok(env_pattern()
        .replace_all(text, |c: &regex::Captures<'_>| env[&c[1]].clone())
        .into_owned())
}

/// Reads `KEY=VALUE` lines from `path`. A missing file yields an empty map.
pub fn read_env_file(path: &Path) -> Result<EnvMap> {
    if !path.exists() {
        return Ok(EnvMap::new());
    }
    let iter = dotenvy::from_path_iter(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = EnvMap::new();
    for item in iter {
        let (k, v) =
            item.map_err(|e| Error::Config(format!("malformed {}: {e}", path.display())))?;
        out.insert(k, v);
    }
    Ok(out)
}

/// The current process environment as an [`EnvMap`].
pub fn process_env() -> EnvMap {
    std::env::vars().collect()
}

/// Loads and validates the configuration at `path`.
///
/// `env` usually comes from [`process_env`]; it overrides values from the
/// adjacent `.env` file.
pub fn load_config(path: &Path, env: &EnvMap) -> Result<Config> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let base_dir = if base_dir.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        base_dir
    };

    let mut merged = read_env_file(&base_dir.join(ENV_FILE_NAME))?;
    merged.extend(env.iter().map(|(k, v)| (k.clone(), v.clone())));

    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    parse_config(&text, is_json, &base_dir, &merged)
}

/// Parses config text; relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, is_json: bool, base_dir: &Path, env: &EnvMap) -> Result<Config> {
    let mut doc: Value = if is_json {
        let json: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        serde_yaml::to_value(json).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?
    } else {
        serde_yaml::from_str(text).map_err(|e| Error::Config(format!("invalid YAML: {e}")))?
    };

    match doc.get_mut("apis") {
        Some(apis) => substitute_in_value(apis, env)?,
        None => return Err(Error::Config("missing `apis` section".into())),
    }

    let raw: RawConfig =
        serde_yaml::from_value(doc).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    raw.validate(base_dir)
}

fn substitute_in_value(value: &mut Value, env: &EnvMap) -> Result<()> {
    match value {
        Value::String(s) => {
            *s = substitute_env(s, env)?;
        }
        Value::Sequence(items) => {
            for item in items {
                substitute_in_value(item, env)?;
            }
        }
        Value::Mapping(map) => {
            for (_, v) in map.iter_mut() {
                substitute_in_value(v, env)?;
            }
        }
        Value::Tagged(tagged) => substitute_in_value(&mut tagged.value, env)?,
        Value::Null | Value::Bool(_) | Value::Number(_) => {}
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    apis: BTreeMap<String, RawProvider>,
    workflow: RawWorkflow,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProvider {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    api_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    // numeric fields may arrive as strings after `${...}` substitution
    #[serde(default, skip_serializing_if = "Option::is_none")]
    temperature: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_tokens: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context_limit_tokens: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chars_per_token_ratio: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anthropic_version: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrompts {
    phase1: PathBuf,
    phase2: PathBuf,
    phase3: PathBuf,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRetry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_attempts: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_delay_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multiplier: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkflow {
    analyst_a: String,
    analyst_b: String,
    arbitrator: String,
    prompts: RawPrompts,
    #[serde(default)]
    retry: RawRetry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    safety_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    results_root: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exclude_dirs: Option<Vec<String>>,
}

fn number(value: &Value, id: &str, field: &str) -> Result<f64> {
    let parsed = match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    parsed
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("provider `{id}`: `{field}` is not a number")))
}

fn positive_int(value: &Value, id: &str, field: &str) -> Result<u64> {
    let v = number(value, id, field)?;
    if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 * 1024.0 {
        return Err(Error::Config(format!(
            "provider `{id}`: `{field}` must be a positive integer, got {v}"
        )));
    }
    Ok(v as u64)
}

impl RawProvider {
    fn validate(self, id: &str, base_dir: &Path) -> Result<ProviderSettings> {
        let kind = ProviderKind::parse(&self.kind).ok_or_else(|| {
            Error::Config(format!(
                "provider `{id}`: unknown kind `{}` (expected openai-chat, anthropic-messages or replay)",
                self.kind
            ))
        })?;

        let temperature = self
            .temperature
            .as_ref()
            .ok_or_else(|| {
                Error::Config(format!(
                    "provider `{id}`: `temperature` must be set explicitly"
                ))
            })
            .and_then(|v| number(v, id, "temperature"))?;
        if !(0.0..=2.0).contains(&temperature) {
            return Err(Error::Config(format!(
                "provider `{id}`: `temperature` must lie in [0, 2], got {temperature}"
            )));
        }
        let max_tokens = self
            .max_tokens
            .as_ref()
            .ok_or_else(|| {
                Error::Config(format!(
                    "provider `{id}`: `max_tokens` must be set explicitly"
                ))
            })
            .and_then(|v| positive_int(v, id, "max_tokens"))?;
        let max_tokens = u32::try_from(max_tokens)
            .map_err(|_| Error::Config(format!("provider `{id}`: `max_tokens` is too large")))?;

        let context_limit_tokens = match &self.context_limit_tokens {
            Some(v) => positive_int(v, id, "context_limit_tokens")?,
            None => kind.default_context_limit(),
        };
        let chars_per_token_ratio = match &self.chars_per_token_ratio {
            Some(v) => number(v, id, "chars_per_token_ratio")?,
            None => DEFAULT_CHARS_PER_TOKEN_RATIO,
        };
        if chars_per_token_ratio <= 0.0 {
            return Err(Error::Config(format!(
                "provider `{id}`: `chars_per_token_ratio` must be positive"
            )));
        }

        let model = self.model.unwrap_or_default();
        let mut base_url = self.base_url.unwrap_or_default();
        match kind {
            ProviderKind::OpenAiChat | ProviderKind::AnthropicMessages => {
                if base_url.trim().is_empty() {
                    return Err(Error::Config(format!(
                        "provider `{id}`: `base_url` is required"
                    )));
                }
                if model.trim().is_empty() {
                    return Err(Error::Config(format!(
                        "provider `{id}`: `model` is required"
                    )));
                }
            }
            ProviderKind::Replay => {
                if !base_url.is_empty() {
                    base_url = resolve(base_dir, Path::new(&base_url))
                        .to_string_lossy()
                        .into_owned();
                }
            }
        }

        Ok(ProviderSettings {
            id: id.to_string(),
            kind,
            base_url,
            api_key: self.api_key.unwrap_or_default(),
            model,
            temperature,
            max_tokens,
            context_limit_tokens,
            chars_per_token_ratio,
            anthropic_version: self.anthropic_version,
        })
    }
}

fn resolve(base_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

fn check_prompt(path: &Path, phase: &str) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| {
        Error::Config(format!(
            "{phase} prompt {} is unreadable: {e}",
            path.display()
        ))
    })?;
    if String::from_utf8_lossy(&bytes).trim().is_empty() {
        return Err(Error::Config(format!(
            "{phase} prompt {} is empty",
            path.display()
        )));
    }
    Ok(())
}

impl RawConfig {
    fn validate(self, base_dir: &Path) -> Result<Config> {
        if self.apis.is_empty() {
            return Err(Error::Config("`apis` declares no providers".into()));
        }
        let providers = self
            .apis
            .into_iter()
            .map(|(id, raw)| raw.validate(&id, base_dir))
            .collect::<Result<Vec<_>>>()?;

        let wf = self.workflow;
        for (role, id) in [
            ("analyst_a", &wf.analyst_a),
            ("analyst_b", &wf.analyst_b),
            ("arbitrator", &wf.arbitrator),
        ] {
            if !providers.iter().any(|p| &p.id == id) {
                return Err(Error::Config(format!(
                    "workflow.{role} refers to undeclared provider `{id}`"
                )));
            }
        }

        let prompts = PromptPaths {
            phase1: resolve(base_dir, &wf.prompts.phase1),
            phase2: resolve(base_dir, &wf.prompts.phase2),
            phase3: resolve(base_dir, &wf.prompts.phase3),
        };
        check_prompt(&prompts.phase1, "phase1")?;
        check_prompt(&prompts.phase2, "phase2")?;
        check_prompt(&prompts.phase3, "phase3")?;

        let defaults = RetryPolicy::default();
        let retry = RetryPolicy {
            max_attempts: wf.retry.max_attempts.unwrap_or(defaults.max_attempts),
            base_delay: wf
                .retry
                .base_delay_ms
                .map(Duration::from_millis)
                .unwrap_or(defaults.base_delay),
            multiplier: wf.retry.multiplier.unwrap_or(defaults.multiplier),
        };
        if retry.max_attempts < 1 {
            return Err(Error::Config(
                "workflow.retry.max_attempts must be at least 1".into(),
            ));
        }
        if !(retry.multiplier >= 1.0 && retry.multiplier.is_finite()) {
            return Err(Error::Config(
                "workflow.retry.multiplier must be >= 1".into(),
            ));
        }

        let safety_margin = wf.safety_margin.unwrap_or(DEFAULT_SAFETY_MARGIN);
        if !(safety_margin > 0.0 && safety_margin <= 1.0) {
            return Err(Error::Config(format!(
                "workflow.safety_margin must lie in (0, 1], got {safety_margin}"
            )));
        }

        let results_root = resolve(
            base_dir,
            &wf.results_root.unwrap_or_else(|| PathBuf::from("results")),
        );
        let exclude_dirs = wf.exclude_dirs.unwrap_or_else(|| {
            crate::corpus::DEFAULT_EXCLUDED_DIRS
                .iter()
                .map(|s| s.to_string())
                .collect()
        });

        Ok(Config {
            providers,
            workflow: WorkflowConfig {
                analyst_a: wf.analyst_a,
                analyst_b: wf.analyst_b,
                arbitrator: wf.arbitrator,
                prompts,
                retry,
                safety_margin,
                results_root,
                exclude_dirs,
            },
        })
    }

    fn from_config(config: &Config) -> RawConfig {
        let apis = config
            .providers
            .iter()
            .map(|p| {
                let raw = RawProvider {
                    kind: p.kind.as_str().to_string(),
                    base_url: Some(p.base_url.clone()),
                    api_key: Some(p.api_key.clone()),
                    model: Some(p.model.clone()),
                    temperature: Some(Value::from(p.temperature)),
                    max_tokens: Some(Value::from(p.max_tokens)),
                    context_limit_tokens: Some(Value::from(p.context_limit_tokens)),
                    chars_per_token_ratio: Some(Value::from(p.chars_per_token_ratio)),
                    anthropic_version: p.anthropic_version.clone(),
                };
                (p.id.clone(), raw)
            })
            .collect();
        let wf = &config.workflow;
        RawConfig {
            apis,
            workflow: RawWorkflow {
                analyst_a: wf.analyst_a.clone(),
                analyst_b: wf.analyst_b.clone(),
                arbitrator: wf.arbitrator.clone(),
                prompts: RawPrompts {
                    phase1: wf.prompts.phase1.clone(),
                    phase2: wf.prompts.phase2.clone(),
                    phase3: wf.prompts.phase3.clone(),
                },
                retry: RawRetry {
                    max_attempts: Some(wf.retry.max_attempts),
                    base_delay_ms: Some(wf.retry.base_delay.as_millis() as u64),
                    multiplier: Some(wf.retry.multiplier),
                },
                safety_margin: Some(wf.safety_margin),
                results_root: Some(wf.results_root.clone()),
                exclude_dirs: Some(wf.exclude_dirs.clone()),
            },
        }
    }
}

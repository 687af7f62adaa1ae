use serde::Serialize;
use serde_json::Value;
use url::Url;

use super::{ChatRequest, WireRequest};
use crate::config::ProviderSettings;
use crate::error::{Error, Result};

/// Default `anthropic-version` header; overridable per provider.
pub const ANTHROPIC_VERSION: &str = "2023-06-01";

const MESSAGES_PATH: &str = "/v1/messages";

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<&'a str>,
    messages: [Message<'a>; 1],
}

fn messages_url(base_url: &str) -> Result<String> {
    let url = Url::parse(base_url.trim())
        .map_err(|e| Error::Config(format!("invalid base_url `{base_url}`: {e}")))?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
        return Err(Error::Config(format!(
            "base_url `{base_url}` must be an absolute http(s) URL"
        )));
    }
    let mut base = base_url.trim().trim_end_matches('/').to_string();
    if let Some(stripped) = base.strip_suffix(MESSAGES_PATH) {
        base = stripped.to_string();
    }
    if let Some(stripped) = base.strip_suffix("/v1") {
        base = stripped.to_string();
    }
    Ok(format!("{base}{MESSAGES_PATH}"))
}

pub fn build_anthropic_request(
    settings: &ProviderSettings,
    request: &ChatRequest,
) -> Result<WireRequest> {
    if settings.api_key.trim().is_empty() {
        return Err(Error::Config(format!(
            "provider `{}`: api_key is required for anthropic-messages",
            settings.id
        )));
    }
    let url = messages_url(&settings.base_url)?;
    let body = serde_json::to_string(&Body {
        model: &request.model,
        max_tokens: request.max_tokens,
        temperature: request.temperature,
        system: request.system_text.as_deref(),
        messages: [Message {
            role: "user",
            content: &request.user_text,
        }],
    })
    .map_err(|e| Error::Config(format!("cannot serialize request: {e}")))?;
    let version = settings
        .anthropic_version
        .clone()
        .unwrap_or_else(|| ANTHROPIC_VERSION.to_string());
    Ok(WireRequest {
        method: "POST",
        url,
        headers: vec![
            ("content-type".into(), "application/json".into()),
            ("x-api-key".into(), settings.api_key.clone()),
            ("anthropic-version".into(), version),
        ],
        body,
    })
}

/// Text of the first `text` content block.
pub fn parse_anthropic_response(body: &str) -> std::result::Result<String, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
    v.get("content")
        .and_then(Value::as_array)
        .and_then(|blocks| {
            blocks
                .iter()
                .find(|b| b.get("type").and_then(Value::as_str) == Some("text"))
        })
        .and_then(|b| b.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "no text content block".to_string())
}

use serde::Serialize;
use serde_json::Value;
use url::Url;

use super::{ChatRequest, WireRequest};
use crate::config::ProviderSettings;
use crate::error::{Error, Result};

const CHAT_COMPLETIONS: &str = "/v1/chat/completions";

/// Rewrites `base_url` to `<scheme>://<host>[:port][/path]/v1/chat/completions`.
///
/// Any `v1` segment already in the path and any trailing
/// `chat/completions` are dropped first, so the result carries exactly one
/// `/v1/` and the function is idempotent.
pub fn normalize_openai_endpoint(base_url: &str) -> Result<String> {
    let url = Url::parse(base_url.trim())
        .map_err(|e| Error::Config(format!("invalid base_url `{base_url}`: {e}")))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(Error::Config(format!(
            "base_url `{base_url}` must use http or https"
        )));
    }
    let host = url
        .host_str()
        .ok_or_else(|| Error::Config(format!("base_url `{base_url}` has no host")))?;

    let mut segments: Vec<&str> = url
        .path_segments()
        .map(|s| s.filter(|seg| !seg.is_empty()).collect())
        .unwrap_or_default();
    if segments.ends_with(&["chat", "completions"]) {
        segments.truncate(segments.len() - 2);
    }
    segments.retain(|seg| *seg != "v1");

    let mut out = format!("{}://{}", url.scheme(), host);
    if let Some(port) = url.port() {
        out.push_str(&format!(":{port}"));
    }
    for seg in segments {
        out.push('/');
        out.push_str(seg);
    }
    out.push_str(CHAT_COMPLETIONS);
    Ok(out)
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    temperature: f64,
    max_tokens: u32,
    messages: Vec<Message<'a>>,
}

pub fn build_openai_request(
    settings: &ProviderSettings,
    request: &ChatRequest,
) -> Result<WireRequest> {
    let url = normalize_openai_endpoint(&settings.base_url)?;
    let mut messages = Vec::with_capacity(2);
    if let Some(system) = &request.system_text {
        messages.push(Message {
            role: "system",
            content: system,
        });
    }
    messages.push(Message {
        role: "user",
        content: &request.user_text,
    });
    let body = serde_json::to_string(&Body {
        model: &request.model,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
        messages,
    })
    .map_err(|e| Error::Config(format!("cannot serialize request: {e}")))?;

    let mut headers = vec![("content-type".to_string(), "application/json".to_string())];
    if !settings.api_key.is_empty() {
        headers.push((
            "authorization".to_string(),
            format!("Bearer {}", settings.api_key),
        ));
    }
    Ok(WireRequest {
        method: "POST",
        url,
        headers,
        body,
    })
}

/// Text of the first choice.
pub fn parse_openai_response(body: &str) -> std::result::Result<String, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "no choices[0].message.content".to_string())
}

//! Provider-neutral completion interface.
//!
//! Every call goes through [`ChatProvider::complete`], which receives only
//! the request the orchestrator built. HTTP providers delegate to
//! [`complete`], which owns the retry loop; the wire is an injected
//! [`Transport`] and waiting an injected [`Clock`].

mod anthropic;
mod http;
mod openai;
mod replay;

use std::fmt;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ProviderKind, ProviderSettings, RetryPolicy};
use crate::error::{Error, Result};
use crate::workflow::{Phase, Role};

pub use anthropic::{build_anthropic_request, parse_anthropic_response, ANTHROPIC_VERSION};
pub use http::HttpTransport;
pub use openai::{build_openai_request, normalize_openai_endpoint, parse_openai_response};
pub use replay::{fixture_name, replay_complete, ReplayProvider};

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system_text: Option<String>,
    pub user_text: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// A single-message request using the provider's model parameters.
    pub fn for_provider(settings: &ProviderSettings, user_text: impl Into<String>) -> Self {
        Self {
            system_text: None,
            user_text: user_text.into(),
            model: settings.model.clone(),
            temperature: settings.temperature,
            max_tokens: settings.max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub provider_id: String,
    /// HTTP status of the successful exchange, `0` for replay.
    pub raw_status: u16,
    pub attempt_count: u32,
}

/// Terminal provider failure, carrying the body of the last response.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("provider `{provider_id}` failed after {attempts} attempt(s) (status {final_status}): {response_payload}")]
pub struct ProviderError {
    pub provider_id: String,
    /// `0` when no HTTP response was received.
    pub final_status: u16,
    pub response_payload: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WireRequest {
    pub method: &'static str,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl WireRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireResponse {
    pub status: u16,
    pub body: String,
}

/// Network-level failure (no HTTP status available).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn send(&self, request: &WireRequest) -> std::result::Result<WireResponse, TransportError>;
}

pub trait Clock: Send + Sync {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn sleep(&self, duration: Duration) {
        if !duration.is_zero() {
            std::thread::sleep(duration);
        }
    }
}

/// Records requested waits without sleeping.
#[derive(Debug, Default)]
pub struct FakeClock {
    waits: Mutex<Vec<Duration>>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn waits(&self) -> Vec<Duration> {
        self.waits.lock().expect("clock lock").clone()
    }
}

impl Clock for FakeClock {
    fn sleep(&self, duration: Duration) {
        self.waits.lock().expect("clock lock").push(duration);
    }
}

/// 429 and 5xx are worth retrying; every other non-success status is not.
pub fn is_retryable_status(status: u16) -> bool {
    status == 429 || (500..=599).contains(&status)
}

pub fn build_wire_request(
    settings: &ProviderSettings,
    request: &ChatRequest,
) -> Result<WireRequest> {
    match settings.kind {
        ProviderKind::OpenAiChat => build_openai_request(settings, request),
        ProviderKind::AnthropicMessages => build_anthropic_request(settings, request),
        ProviderKind::Replay => Err(Error::Config(format!(
            "provider `{}` is a replay provider and has no wire format",
            settings.id
        ))),
    }
}

fn parse_wire_response(
    settings: &ProviderSettings,
    body: &str,
) -> std::result::Result<String, String> {
    match settings.kind {
        ProviderKind::OpenAiChat => parse_openai_response(body),
        ProviderKind::AnthropicMessages => parse_anthropic_response(body),
        ProviderKind::Replay => Err("replay providers have no wire format".into()),
    }
}

/// Sends `request` to an HTTP provider with bounded retries.
///
/// Attempt `k > 1` is preceded by a wait of
/// `base_delay * multiplier^(k - 2)`, so the defaults wait 0, 1000 and
/// 2000 ms before attempts 1 to 3. Zero waits never reach the clock.
pub fn complete(
    settings: &ProviderSettings,
    request: &ChatRequest,
    retry: &RetryPolicy,
    transport: &dyn Transport,
    clock: &dyn Clock,
) -> Result<ChatResponse> {
    if request.user_text.is_empty() {
        return Err(Error::Input("chat request has empty user text".into()));
    }
    let wire = build_wire_request(settings, request)?;
    let max_attempts = retry.max_attempts.max(1);
    let fail = |status: u16, payload: String, attempts: u32| {
        Error::Provider(ProviderError {
            provider_id: settings.id.clone(),
            final_status: status,
            response_payload: payload,
            attempts,
        })
    };

    let mut last = (0u16, String::new());
    for attempt in 1..=max_attempts {
        let delay = retry.delay_before(attempt);
        if !delay.is_zero() {
            clock.sleep(delay);
        }
        match transport.send(&wire) {
            Ok(resp) if (200..300).contains(&resp.status) => {
                return match parse_wire_response(settings, &resp.body) {
                    Ok(text) => Ok(ChatResponse {
                        text,
                        provider_id: settings.id.clone(),
                        raw_status: resp.status,
                        attempt_count: attempt,
                    }),
                    Err(why) => Err(fail(
                        resp.status,
                        format!("unparseable response ({why}): {}", resp.body),
                        attempt,
                    )),
                };
            }
            Ok(resp) if is_retryable_status(resp.status) => last = (resp.status, resp.body),
            Ok(resp) => return Err(fail(resp.status, resp.body, attempt)),
            Err(TransportError(msg)) => last = (0, msg),
        }
    }
    Err(fail(last.0, last.1, max_attempts))
}

/// Which call of the protocol a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CallKey {
    pub phase: Phase,
    pub role: Role,
}

impl fmt::Display for CallKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.phase, self.role)
    }
}

/// Uniform interface the orchestrator drives.
pub trait ChatProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, key: CallKey, request: &ChatRequest) -> Result<ChatResponse>;
}

/// A real chat API reached through a [`Transport`].
pub struct HttpProvider {
    settings: ProviderSettings,
    retry: RetryPolicy,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
}

impl HttpProvider {
    pub fn new(
        settings: ProviderSettings,
        retry: RetryPolicy,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            settings,
            retry,
            transport,
            clock,
        }
    }
}

impl ChatProvider for HttpProvider {
    fn id(&self) -> &str {
        &self.settings.id
    }

    fn complete(&self, _key: CallKey, request: &ChatRequest) -> Result<ChatResponse> {
        complete(
            &self.settings,
            request,
            &self.retry,
            self.transport.as_ref(),
            self.clock.as_ref(),
        )
    }
}

/// Instantiates the provider implementation selected by `settings.kind`.
pub fn build_provider(
    settings: &ProviderSettings,
    retry: &RetryPolicy,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
) -> Result<Box<dyn ChatProvider>> {
    Ok(match settings.kind {
        ProviderKind::OpenAiChat | ProviderKind::AnthropicMessages => {
            // surface endpoint/key problems at construction time
            build_wire_request(settings, &ChatRequest::for_provider(settings, "-"))?;
            Box::new(HttpProvider::new(
                settings.clone(),
                retry.clone(),
                transport,
                clock,
            ))
        }
        ProviderKind::Replay => {
            if settings.base_url.is_empty() {
                return Err(Error::Config(format!(
                    "replay provider `{}` needs `base_url` set to its fixture directory",
                    settings.id
                )));
            }
            Box::new(ReplayProvider::new(
                &settings.id,
                PathBuf::from(&settings.base_url),
            ))
        }
    })
}

//! Retry behaviour against a scripted transport and a fake clock.

use std::collections::VecDeque;
use std::sync::Mutex;

use crossfix::config::{ProviderKind, ProviderSettings, RetryPolicy};
use crossfix::providers::{
    complete, ChatRequest, FakeClock, Transport, TransportError, WireRequest, WireResponse,
};
use crossfix::Error;

struct Script(Mutex<VecDeque<(u16, &'static str)>>);

impl Transport for Script {
    fn send(&self, _request: &WireRequest) -> Result<WireResponse, TransportError> {
        let (status, body) = self
            .0
            .lock()
            .unwrap()
            .pop_front()
            .expect("script exhausted");
        Ok(WireResponse {
            status,
            body: body.to_string(),
        })
    }
}

fn main() {
    let settings = ProviderSettings {
        id: "openai".into(),
        kind: ProviderKind::OpenAiChat,
        base_url: "https://api.openai.com".into(),
        api_key: "sk-demo".into(),
        model: "gpt-3.5-turbo".into(),
        temperature: 0.1,
        max_tokens: 3000,
        context_limit_tokens: 16_000,
        chars_per_token_ratio: 0.25,
        anthropic_version: None,
    };
    let request = ChatRequest::for_provider(&settings, "Why does checkout divide by zero?");
    let retry = RetryPolicy::default();
    let ok = r#"{"choices":[{"message":{"role":"assistant","content":"Empty cart."}}]}"#;

    let scenarios: [(&str, Vec<(u16, &'static str)>); 3] = [
        (
            "429, 503, then 200",
            vec![(429, "rate limited"), (503, "busy"), (200, ok)],
        ),
        (
            "three 500s",
            vec![
                (500, "e1"),
                (500, "e2"),
                (500, "{\"error\":\"upstream down\"}"),
            ],
        ),
        ("401", vec![(401, "{\"error\":\"invalid api key\"}")]),
    ];
    for (name, script) in scenarios {
        let transport = Script(Mutex::new(script.into()));
        let clock = FakeClock::new();
        let outcome = match complete(&settings, &request, &retry, &transport, &clock) {
            Ok(r) => format!("ok after {} attempt(s): {:?}", r.attempt_count, r.text),
            Err(Error::Provider(p)) => format!(
                "failed after {} attempt(s), status {}, payload {}",
                p.attempts, p.final_status, p.response_payload
            ),
            Err(e) => format!("error: {e}"),
        };
        println!("{name}: {outcome}; waits {:?}", clock.waits());
    }
}

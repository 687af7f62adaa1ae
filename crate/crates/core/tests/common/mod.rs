#![allow(dead_code)]

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crossfix::config::{load_config, Config, EnvMap};
use crossfix::error::{Error, Result};
use crossfix::providers::{
    CallKey, ChatProvider, ChatRequest, ChatResponse, ProviderError, ReplayProvider, Transport,
    TransportError, WireRequest, WireResponse,
};

pub const SENTINEL_A: &str = "SENTINEL-A-7f3c91";
pub const SENTINEL_B: &str = "SENTINEL-B-2d84e0";

pub const ARBITRATION: &str = "## CONTRIBUTION ANALYSIS\n\
**AI^A CONTRIBUTION:** 20%\n\
**AI^B CONTRIBUTION:** 30%\n\
**CONVERGENT (BOTH AGREED):** 40%\n\
**FINAL ARBITRATION:** 10%\n\
\n\
## DEFINITIVE FIX LIST\n\
### Fix #1: guard the empty cart\n\
```python\nif not items:\n    return 0\n```\n\
\n\
## REJECTED FIXES\n\
1. Rewrite totals with Decimal - no evidence of float error\n";

/// A self-contained project directory using replay providers.
pub struct Project {
    pub dir: PathBuf,
    pub config_path: PathBuf,
    pub bug: PathBuf,
    pub codebase: PathBuf,
    pub fixtures: PathBuf,
    pub results: PathBuf,
}

impl Project {
    pub fn new(dir: &Path) -> Self {
        Self::with_limits(dir, 200_000, 200_000)
    }

    /// Replay providers `a` (analyst A and arbitrator) and `b` with the given
    /// context limits.
    pub fn with_limits(dir: &Path, limit_a: u64, limit_b: u64) -> Self {
        let p = Project {
            dir: dir.to_path_buf(),
            config_path: dir.join("config.yaml"),
            bug: dir.join("bug.txt"),
            codebase: dir.join("codebase"),
            fixtures: dir.join("fixtures"),
            results: dir.join("results"),
        };
        fs::create_dir_all(dir.join("prompts")).unwrap();
        fs::create_dir_all(p.codebase.join("shop")).unwrap();
        fs::create_dir_all(&p.fixtures).unwrap();
        fs::write(
            dir.join("prompts/p1.txt"),
            "Audit the code for the reported bug.",
        )
        .unwrap();
        fs::write(
            dir.join("prompts/p2.txt"),
            "Compare your audit with the peer audit.",
        )
        .unwrap();
        fs::write(
            dir.join("prompts/p3.txt"),
            "Arbitrate and list definitive fixes.",
        )
        .unwrap();
        fs::write(&p.bug, "Checkout total is wrong when the cart is empty.\n").unwrap();
        fs::write(
            p.codebase.join("shop/cart.py"),
            "def total(items):\n    return sum(i.price for i in items) / len(items)\n",
        )
        .unwrap();
        fs::write(
            p.codebase.join("shop/api.js"),
            "export const ping = () => 'pong';\n",
        )
        .unwrap();
        fs::write(p.codebase.join("logo.bin"), "not source\n").unwrap();

        p.write_fixture(
            "phase1_analyst_a.md",
            &format!("Audit A {SENTINEL_A}: divide by zero in total().\n"),
        );
        p.write_fixture(
            "phase1_analyst_b.md",
            &format!("Audit B {SENTINEL_B}: empty cart unhandled.\n"),
        );
        p.write_fixture(
            "phase2_analyst_a.md",
            "Consolidation A: agree on the guard.\n",
        );
        p.write_fixture(
            "phase2_analyst_b.md",
            "Consolidation B: agree, reject Decimal.\n",
        );
        p.write_fixture("phase3_arbitrator.md", ARBITRATION);

        let config = format!(
            "apis:\n  a:\n    kind: replay\n    base_url: fixtures\n    temperature: 0.1\n    max_tokens: 3000\n    context_limit_tokens: {limit_a}\n  b:\n    kind: replay\n    base_url: fixtures\n    temperature: 0.1\n    max_tokens: 4000\n    context_limit_tokens: {limit_b}\n\
workflow:\n  analyst_a: a\n  analyst_b: b\n  arbitrator: a\n  prompts:\n    phase1: prompts/p1.txt\n    phase2: prompts/p2.txt\n    phase3: prompts/p3.txt\n  results_root: results\n"
        );
        fs::write(&p.config_path, config).unwrap();
        p
    }

    pub fn write_fixture(&self, name: &str, body: &str) {
        fs::write(self.fixtures.join(name), body).unwrap();
    }

    pub fn config(&self) -> Config {
        load_config(&self.config_path, &EnvMap::new()).unwrap()
    }
}

type Scripted = std::result::Result<WireResponse, TransportError>;

/// Returns pre-scripted responses in order and records every request.
#[derive(Default)]
pub struct ScriptedTransport {
    script: Mutex<VecDeque<Scripted>>,
    seen: Mutex<Vec<WireRequest>>,
}

impl ScriptedTransport {
    pub fn new(script: Vec<Scripted>) -> Self {
        Self {
            script: Mutex::new(script.into()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<WireRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, request: &WireRequest) -> Scripted {
        self.seen.lock().unwrap().push(request.clone());
        self.script
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(TransportError("script exhausted".into())))
    }
}

pub fn status(code: u16, body: &str) -> Scripted {
    Ok(WireResponse {
        status: code,
        body: body.to_string(),
    })
}

pub fn openai_ok(text: &str) -> Scripted {
    status(
        200,
        &serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]})
            .to_string(),
    )
}

/// Shared log of `(call, user prompt)` pairs across providers.
pub type CallLog = Arc<Mutex<Vec<(CallKey, String)>>>;

/// Replays fixtures, logs prompts, and fails the `fail_at`-th call overall
/// (1-based) with HTTP 503.
pub struct Recording {
    inner: ReplayProvider,
    log: CallLog,
    counter: Arc<Mutex<u32>>,
    fail_at: Option<u32>,
}

impl Recording {
    pub fn new(
        id: &str,
        fixtures: &Path,
        log: CallLog,
        counter: Arc<Mutex<u32>>,
        fail_at: Option<u32>,
    ) -> Self {
        Self {
            inner: ReplayProvider::new(id, fixtures.to_path_buf()),
            log,
            counter,
            fail_at,
        }
    }
}

impl ChatProvider for Recording {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, key: CallKey, request: &ChatRequest) -> Result<ChatResponse> {
        let n = {
            let mut c = self.counter.lock().unwrap();
            *c += 1;
            *c
        };
        self.log
            .lock()
            .unwrap()
            .push((key, request.user_text.clone()));
        if Some(n) == self.fail_at {
            return Err(Error::Provider(ProviderError {
                provider_id: self.id().to_string(),
                final_status: 503,
                response_payload: format!("injected failure at call {n}"),
                attempts: 3,
            }));
        }
        self.inner.complete(key, request)
    }
}

/// Builds the three role providers over `project`'s fixtures, all sharing
/// one log and call counter.
pub fn recording_providers(
    project: &Project,
    fail_at: Option<u32>,
) -> (CallLog, [Box<dyn ChatProvider>; 3]) {
    let log: CallLog = Arc::default();
    let counter = Arc::new(Mutex::new(0));
    let make = |id: &str| -> Box<dyn ChatProvider> {
        Box::new(Recording::new(
            id,
            &project.fixtures,
            log.clone(),
            counter.clone(),
            fail_at,
        ))
    };
    let providers = [make("a"), make("b"), make("a")];
    (log, providers)
}

/// Relative path -> bytes for every file under `dir`.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walk(dir)
        .into_iter()
        .map(|p| {
            let rel = p
                .strip_prefix(dir)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            let bytes = fs::read(&p).unwrap();
            (rel, bytes)
        })
        .collect();
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

/// Manifest JSON with the per-invocation fields removed.
pub fn stable_manifest(bytes: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    let obj = v.as_object_mut().unwrap();
    for k in ["started_at", "finished_at", "run_dir", "index"] {
        obj.remove(k);
    }
    v
}

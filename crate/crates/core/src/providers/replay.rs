use std::fs;
use std::path::{Path, PathBuf};

use super::{CallKey, ChatProvider, ChatRequest, ChatResponse, ProviderError};
use crate::error::{Error, Result};

/// `<phase>_<role>.md`, e.g. `phase1_analyst_a.md`.
pub fn fixture_name(key: CallKey) -> String {
    format!("{}_{}.md", key.phase, key.role)
}

/// Returns the fixture for `key` verbatim.
pub fn replay_complete(
    fixture_dir: &Path,
    provider_id: &str,
    key: CallKey,
) -> Result<ChatResponse> {
    let name = fixture_name(key);
    let path = fixture_dir.join(&name);
    match fs::read(&path) {
        Ok(bytes) => Ok(ChatResponse {
            text: String::from_utf8_lossy(&bytes).into_owned(),
            provider_id: provider_id.to_string(),
            raw_status: 0,
            attempt_count: 1,
        }),
        Err(e) => Err(Error::Provider(ProviderError {
            provider_id: provider_id.to_string(),
            final_status: 0,
            response_payload: format!(
                "missing replay fixture {name} in {}: {e}",
                fixture_dir.display()
            ),
            attempts: 1,
        })),
    }
}

/// Offline provider answering from `<phase>_<role>.md` files.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    id: String,
    fixture_dir: PathBuf,
}

impl ReplayProvider {
    pub fn new(id: &str, fixture_dir: PathBuf) -> Self {
        Self {
            id: id.to_string(),
            fixture_dir,
        }
    }
}

impl ChatProvider for ReplayProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, key: CallKey, _request: &ChatRequest) -> Result<ChatResponse> {
        replay_complete(&self.fixture_dir, &self.id, key)
    }
}

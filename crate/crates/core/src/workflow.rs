//! The three-phase protocol.
//!
//! Phase 1: each analyst audits the task and corpus on its own (chunked to
//! its budget). Phase 2: each analyst consolidates its own audit against the
//! peer's. Phase 3: the arbitrator synthesises the definitive fixes from all
//! four documents. Calls are strictly sequential (analyst A before B) and
//! every artifact lands in a fresh `bugNNNN_results` directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{Config, ProviderSettings};
use crate::corpus::{scan_codebase_excluding, Corpus};
use crate::error::{Error, Result};
use crate::providers::{build_provider, CallKey, ChatProvider, ChatRequest, Clock, Transport};
use crate::tokens::{chunk_corpus, estimate_tokens, CorpusChunk, TokenBudget};

pub const MAX_RUN_INDEX: u32 = 9999;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INPUTS_DIR: &str = "inputs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Phase1,
    Phase2,
    Phase3,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Phase1 => "phase1",
            Phase::Phase2 => "phase2",
            Phase::Phase3 => "phase3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    AnalystA,
    AnalystB,
    Arbitrator,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::AnalystA => "analyst_a",
            Role::AnalystB => "analyst_b",
            Role::Arbitrator => "arbitrator",
        })
    }
}

/// Fixed (phase, role) to file-name mapping. `None` for pairs the protocol
/// never produces.
pub fn artifact_filename(phase: Phase, role: Role) -> Option<&'static str> {
    match (phase, role) {
        (Phase::Phase1, Role::AnalystA) => Some("audit_report_A.md"),
        (Phase::Phase1, Role::AnalystB) => Some("audit_report_B.md"),
        (Phase::Phase2, Role::AnalystA) => Some("consolidation_A.md"),
        (Phase::Phase2, Role::AnalystB) => Some("consolidation_B.md"),
        (Phase::Phase3, Role::Arbitrator) => Some("definitive_fixes.md"),
        _ => None,
    }
}

pub const ARTIFACT_FILES: [&str; 5] = [
    "audit_report_A.md",
    "audit_report_B.md",
    "consolidation_A.md",
    "consolidation_B.md",
    "definitive_fixes.md",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDirectory {
    pub index: u32,
    pub path: PathBuf,
}

pub fn run_dir_name(index: u32) -> String {
    format!("bug{index:04}_results")
}

fn parse_run_dir_name(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("bug")?.strip_suffix("_results")?;
    if digits.len() == 4 && digits.bytes().all(|b| b.is_ascii_digit()) {
        digits.parse().ok()
    } else {
        None
    }
}

/// Creates `bugNNNN_results` under `results_root`, one past the highest
/// existing index.
pub fn create_run_dir(results_root: &Path) -> Result<RunDirectory> {
    fs::create_dir_all(results_root).map_err(|e| Error::io(results_root, e))?;
    let entries = fs::read_dir(results_root).map_err(|e| Error::io(results_root, e))?;
    let mut highest = 0;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(results_root, e))?;
        if let Some(i) = entry.file_name().to_str().and_then(parse_run_dir_name) {
            highest = highest.max(i);
        }
    }
    let index = highest + 1;
    if index > MAX_RUN_INDEX {
        return Err(Error::Run(format!(
            "run index would exceed {MAX_RUN_INDEX} in {}",
            results_root.display()
        )));
    }
    let path = results_root.join(run_dir_name(index));
    fs::create_dir(&path).map_err(|e| Error::io(&path, e))?;
    Ok(RunDirectory { index, path })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseArtifact {
    pub phase: Phase,
    pub role: Role,
    pub filename: String,
    pub bytes: usize,
    pub sha256: String,
    #[serde(skip)]
    pub content: String,
}

impl PhaseArtifact {
    fn new(phase: Phase, role: Role, content: String) -> Self {
        let filename = artifact_filename(phase, role)
            .expect("artifact produced for a valid phase/role pair")
            .to_string();
        Self {
            phase,
            role,
            filename,
            bytes: content.len(),
            sha256: hex_digest(content.as_bytes()),
            content,
        }
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub phase: Option<Phase>,
    pub role: Option<Role>,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_dir: String,
    pub index: u32,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<FailureRecord>,
    pub provider_roles: BTreeMap<Role, String>,
    /// Paths relative to the run directory.
    pub copied_inputs: Vec<String>,
    pub chunks: BTreeMap<Role, usize>,
    pub provider_calls: u32,
    pub artifacts: Vec<PhaseArtifact>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn read(run_dir: &Path) -> Result<RunManifest> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInputs {
    pub task_description: String,
    pub corpus: Corpus,
}

impl TaskInputs {
    pub fn new(task_description: impl Into<String>, corpus: Corpus) -> Result<Self> {
        let task_description = task_description.into();
        if task_description.trim().is_empty() {
            return Err(Error::Input("task description is empty".into()));
        }
        Ok(Self {
            task_description,
            corpus,
        })
    }
}

/// Template texts for the three phases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub phase1: String,
    pub phase2: String,
    pub phase3: String,
}

impl PromptTemplates {
    pub fn load(config: &Config) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Ok(Self {
            phase1: read(&config.workflow.prompts.phase1)?,
            phase2: read(&config.workflow.prompts.phase2)?,
            phase3: read(&config.workflow.prompts.phase3)?,
        })
    }
}

fn section(out: &mut String, label: &str, body: &str) {
    out.push_str("\n\n## ");
    out.push_str(label);
    out.push_str("\n\n");
    out.push_str(body);
}

pub fn phase1_prompt(template: &str, task: &str, corpus_chunk: &str) -> String {
    let mut out = template.trim_end().to_string();
    section(&mut out, "TASK", task);
    section(&mut out, "CODEBASE", corpus_chunk);
    out
}

pub fn phase2_prompt(template: &str, task: &str, corpus: &str, own: &str, peer: &str) -> String {
    let mut out = template.trim_end().to_string();
    section(&mut out, "TASK", task);
    section(&mut out, "CODEBASE", corpus);
    section(&mut out, "YOUR PRIOR ANALYSIS", own);
    section(&mut out, "PEER ANALYSIS", peer);
    out
}

pub fn phase3_prompt(
    template: &str,
    task: &str,
    corpus: &str,
    audits: [&str; 2],
    consolidations: [&str; 2],
) -> String {
    let mut out = template.trim_end().to_string();
    section(&mut out, "TASK", task);
    section(&mut out, "CODEBASE", corpus);
    section(&mut out, "AUDIT REPORT A", audits[0]);
    section(&mut out, "AUDIT REPORT B", audits[1]);
    section(&mut out, "CONSOLIDATION A", consolidations[0]);
    section(&mut out, "CONSOLIDATION B", consolidations[1]);
    out
}

pub fn chunk_separator(k: usize, n: usize) -> String {
    format!("\n\n# ----- chunk {k}/{n} response -----\n\n")
}

/// A provider bound to a role, with the settings and budget it runs under.
pub struct RoleBinding {
    pub role: Role,
    pub settings: ProviderSettings,
    pub budget: TokenBudget,
    pub provider: Box<dyn ChatProvider>,
}

impl RoleBinding {
    pub fn new(
        role: Role,
        settings: ProviderSettings,
        safety_margin: f64,
        provider: Box<dyn ChatProvider>,
    ) -> Result<Self> {
        let budget = TokenBudget::new(settings.context_limit_tokens, safety_margin)?;
        Ok(Self {
            role,
            settings,
            budget,
            provider,
        })
    }

    fn call(&self, phase: Phase, prompt: String) -> Result<String> {
        let request = ChatRequest::for_provider(&self.settings, prompt);
        let key = CallKey {
            phase,
            role: self.role,
        };
        self.provider
            .complete(key, &request)
            .map(|r| r.text)
            .map_err(|e| self.tag(phase, e))
    }

    fn tag(&self, phase: Phase, source: Error) -> Error {
        Error::Phase {
            phase,
            role: self.role,
            source: Box::new(source),
        }
    }

    fn check_fits(&self, phase: Phase, prompt: &str) -> Result<()> {
        let need = estimate_tokens(prompt, self.settings.chars_per_token_ratio);
        if need > self.budget.effective_tokens {
            return Err(self.tag(
                phase,
                Error::Budget(format!(
                    "{phase} prompt for {} needs ~{need} tokens but provider `{}` allows {}",
                    self.role, self.settings.id, self.budget.effective_tokens
                )),
            ));
        }
        Ok(())
    }
}

/// Splits the corpus for one analyst, reserving room for the template and
/// task text that accompany every chunk.
pub fn plan_phase1_chunks(
    binding: &RoleBinding,
    template: &str,
    inputs: &TaskInputs,
) -> Result<Vec<CorpusChunk>> {
    let ratio = binding.settings.chars_per_token_ratio;
    let scaffold = estimate_tokens(
        &phase1_prompt(template, &inputs.task_description, ""),
        ratio,
    );
    binding
        .budget
        .reserve(scaffold)
        .and_then(|b| chunk_corpus(&inputs.corpus, &b, ratio))
        .map_err(|e| binding.tag(Phase::Phase1, e))
}

/// Independent audit: one call per chunk, responses joined with separators.
pub fn run_phase1(
    binding: &RoleBinding,
    template: &str,
    inputs: &TaskInputs,
    chunks: &[CorpusChunk],
) -> Result<String> {
    let n = chunks.len();
    let mut out = String::new();
    for (i, chunk) in chunks.iter().enumerate() {
        if i > 0 {
            out.push_str(&chunk_separator(i + 1, n));
        }
        let prompt = phase1_prompt(template, &inputs.task_description, &chunk.text);
        out.push_str(&binding.call(Phase::Phase1, prompt)?);
    }
    Ok(out)
}

/// Cross-critique of `own` against `peer`.
pub fn run_phase2(
    binding: &RoleBinding,
    template: &str,
    inputs: &TaskInputs,
    own: &str,
    peer: &str,
) -> Result<String> {
    let prompt = phase2_prompt(
        template,
        &inputs.task_description,
        &inputs.corpus.assembled_text,
        own,
        peer,
    );
    binding.check_fits(Phase::Phase2, &prompt)?;
    binding.call(Phase::Phase2, prompt)
}

/// Arbitration over both audits and both consolidations.
pub fn run_phase3(
    binding: &RoleBinding,
    template: &str,
    inputs: &TaskInputs,
    audits: [&str; 2],
    consolidations: [&str; 2],
) -> Result<String> {
    let prompt = phase3_prompt(
        template,
        &inputs.task_description,
        &inputs.corpus.assembled_text,
        audits,
        consolidations,
    );
    binding.check_fits(Phase::Phase3, &prompt)?;
    binding.call(Phase::Phase3, prompt)
}

/// A workflow that stopped early. `manifest` is set when a run directory
/// was created.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    pub run_dir: Option<PathBuf>,
    pub manifest: Option<Box<RunManifest>>,
    #[source]
    pub error: Error,
}

impl RunFailure {
    pub fn exit_code(&self) -> i32 {
        self.error.exit_code()
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self {
            run_dir: None,
            manifest: None,
            error,
        }
    }
}

/// Wraps a provider to count calls.
struct Counted {
    inner: Box<dyn ChatProvider>,
    calls: Arc<AtomicU32>,
}

impl ChatProvider for Counted {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(
        &self,
        key: CallKey,
        request: &ChatRequest,
    ) -> Result<crate::providers::ChatResponse> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(key, request)
    }
}

pub struct Orchestrator {
    config: Config,
    analyst_a: RoleBinding,
    analyst_b: RoleBinding,
    arbitrator: RoleBinding,
    calls: Arc<AtomicU32>,
}

impl Orchestrator {
    /// Builds providers for each role from the config.
    pub fn from_config(
        config: &Config,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self> {
        let retry = &config.workflow.retry;
        let make =
            |s: &ProviderSettings| build_provider(s, retry, transport.clone(), clock.clone());
        Self::with_providers(
            config,
            make(config.analyst_a())?,
            make(config.analyst_b())?,
            make(config.arbitrator())?,
        )
    }

    /// Uses caller-supplied providers for the three roles.
    pub fn with_providers(
        config: &Config,
        analyst_a: Box<dyn ChatProvider>,
        analyst_b: Box<dyn ChatProvider>,
        arbitrator: Box<dyn ChatProvider>,
    ) -> Result<Self> {
        let calls = Arc::new(AtomicU32::new(0));
        let margin = config.workflow.safety_margin;
        let bind = |role, settings: &ProviderSettings, inner| {
            RoleBinding::new(
                role,
                settings.clone(),
                margin,
                Box::new(Counted {
                    inner,
                    calls: calls.clone(),
                }),
            )
        };
        Ok(Self {
            analyst_a: bind(Role::AnalystA, config.analyst_a(), analyst_a)?,
            analyst_b: bind(Role::AnalystB, config.analyst_b(), analyst_b)?,
            arbitrator: bind(Role::Arbitrator, config.arbitrator(), arbitrator)?,
            config: config.clone(),
            calls,
        })
    }

    pub fn binding(&self, role: Role) -> &RoleBinding {
        match role {
            Role::AnalystA => &self.analyst_a,
            Role::AnalystB => &self.analyst_b,
            Role::Arbitrator => &self.arbitrator,
        }
    }

    /// Runs the full protocol for the task in `task_path` over `codebase_root`.
    pub fn run(
        &self,
        task_path: &Path,
        codebase_root: &Path,
    ) -> std::result::Result<RunManifest, RunFailure> {
        let started_at = now();
        let task = fs::read_to_string(task_path).map_err(|e| {
            Error::Input(format!(
                "cannot read task file {}: {e}",
                task_path.display()
            ))
        })?;
        let templates = PromptTemplates::load(&self.config)?;
        let corpus = scan_codebase_excluding(codebase_root, &self.config.workflow.exclude_dirs)?;
        let inputs = TaskInputs::new(task, corpus)?;

        let run_dir = create_run_dir(&self.config.workflow.results_root)?;
        let mut manifest = RunManifest {
            run_dir: run_dir_name(run_dir.index),
            index: run_dir.index,
            status: RunStatus::Failed,
            failure: None,
            provider_roles: [Role::AnalystA, Role::AnalystB, Role::Arbitrator]
                .into_iter()
                .map(|r| (r, self.binding(r).settings.id.clone()))
                .collect(),
            copied_inputs: Vec::new(),
            chunks: BTreeMap::new(),
            provider_calls: 0,
            artifacts: Vec::new(),
            started_at,
            finished_at: String::new(),
        };
        self.calls.store(0, Ordering::SeqCst);

        let result = self
            .copy_inputs(&run_dir.path, task_path, &inputs, &mut manifest)
            .and_then(|_| self.execute(&run_dir.path, &templates, &inputs, &mut manifest));

        manifest.provider_calls = self.calls.load(Ordering::SeqCst);
        manifest.finished_at = now();
        match result {
            Ok(()) => {
                manifest.status = RunStatus::Succeeded;
                write_manifest(&run_dir.path, &manifest).map_err(|error| RunFailure {
                    run_dir: Some(run_dir.path.clone()),
                    manifest: Some(Box::new(manifest.clone())),
                    error,
                })?;
                Ok(manifest)
            }
            Err(error) => {
                let (phase, role) = match &error {
                    Error::Phase { phase, role, .. } => (Some(*phase), Some(*role)),
                    _ => (None, None),
                };
                manifest.failure = Some(FailureRecord {
                    phase,
                    role,
                    exit_code: error.exit_code(),
                    message: error.to_string(),
                });
                // the original error is more useful than a manifest write failure
                let _ = write_manifest(&run_dir.path, &manifest);
                Err(RunFailure {
                    run_dir: Some(run_dir.path),
                    manifest: Some(Box::new(manifest)),
                    error,
                })
            }
        }
    }

    fn copy_inputs(
        &self,
        dir: &Path,
        task_path: &Path,
        inputs: &TaskInputs,
        manifest: &mut RunManifest,
    ) -> Result<()> {
        let inputs_dir = dir.join(INPUTS_DIR);
        let prompts_dir = inputs_dir.join("prompts");
        fs::create_dir_all(&prompts_dir).map_err(|e| Error::io(&prompts_dir, e))?;

        let mut write = |rel: String, bytes: &[u8]| -> Result<()> {
            let path = dir.join(&rel);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            manifest.copied_inputs.push(rel);
            Ok(())
        };

        let task_bytes = fs::read(task_path).map_err(|e| Error::io(task_path, e))?;
        write(format!("{INPUTS_DIR}/bug.txt"), &task_bytes)?;
        write(
            format!("{INPUTS_DIR}/config.snapshot.yaml"),
            self.config.to_snapshot_yaml()?.as_bytes(),
        )?;

        let prompts = &self.config.workflow.prompts;
        let mut used: Vec<String> = Vec::new();
        for (phase, path) in [
            (Phase::Phase1, &prompts.phase1),
            (Phase::Phase2, &prompts.phase2),
            (Phase::Phase3, &prompts.phase3),
        ] {
            let base = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("{phase}.txt"));
            let name = if used.contains(&base) {
                format!("{phase}_{base}")
            } else {
                base
            };
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            write(format!("{INPUTS_DIR}/prompts/{name}"), &bytes)?;
            used.push(name);
        }
        write(
            format!("{INPUTS_DIR}/codebase_listing.txt"),
            inputs.corpus.listing().as_bytes(),
        )?;
        Ok(())
    }

    fn execute(
        &self,
        dir: &Path,
        templates: &PromptTemplates,
        inputs: &TaskInputs,
        manifest: &mut RunManifest,
    ) -> Result<()> {
        let chunks_a = plan_phase1_chunks(&self.analyst_a, &templates.phase1, inputs)?;
        manifest.chunks.insert(Role::AnalystA, chunks_a.len());
        let chunks_b = plan_phase1_chunks(&self.analyst_b, &templates.phase1, inputs)?;
        manifest.chunks.insert(Role::AnalystB, chunks_b.len());

        let mut persist = |phase: Phase, role: Role, content: String| -> Result<String> {
            let artifact = PhaseArtifact::new(phase, role, content);
            let path = dir.join(&artifact.filename);
            fs::write(&path, &artifact.content).map_err(|e| Error::io(&path, e))?;
            let content = artifact.content.clone();
            manifest.artifacts.push(artifact);
            Ok(content)
        };

        let audit_a = run_phase1(&self.analyst_a, &templates.phase1, inputs, &chunks_a)?;
        let audit_a = persist(Phase::Phase1, Role::AnalystA, audit_a)?;
        let audit_b = run_phase1(&self.analyst_b, &templates.phase1, inputs, &chunks_b)?;
        let audit_b = persist(Phase::Phase1, Role::AnalystB, audit_b)?;

        let cons_a = run_phase2(
            &self.analyst_a,
            &templates.phase2,
            inputs,
            &audit_a,
            &audit_b,
        )?;
        let cons_a = persist(Phase::Phase2, Role::AnalystA, cons_a)?;
        let cons_b = run_phase2(
            &self.analyst_b,
            &templates.phase2,
            inputs,
            &audit_b,
            &audit_a,
        )?;
        let cons_b = persist(Phase::Phase2, Role::AnalystB, cons_b)?;

        let fixes = run_phase3(
            &self.arbitrator,
            &templates.phase3,
            inputs,
            [&audit_a, &audit_b],
            [&cons_a, &cons_b],
        )?;
        persist(Phase::Phase3, Role::Arbitrator, fixes)?;
        Ok(())
    }
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Run(format!("cannot serialize manifest: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Convenience wrapper: build providers from `config` and run once.
pub fn run_workflow(
    config: &Config,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    task_path: &Path,
    codebase_root: &Path,
) -> std::result::Result<RunManifest, RunFailure> {
    Orchestrator::from_config(config, transport, clock)?.run(task_path, codebase_root)
}

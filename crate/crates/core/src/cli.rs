//! Command implementations behind the `crossfix` binary.
//!
//! Each command writes machine-readable output to `out` and diagnostics to
//! `err`, and returns an [`ExitStatus`]. Network access and waiting are
//! injected through [`Services`] so every command runs offline in tests.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use crate::config::{load_config, process_env, Config, EnvMap, ProviderKind, ProviderSettings};
use crate::corpus::{scan_codebase_excluding, Corpus};
use crate::error::Error;
use crate::metrics::{self, CiMethod, MetricsReport, ParseFailure, RunMetrics};
use crate::providers::{complete, ChatRequest, Clock, HttpTransport, SystemClock, Transport};
use crate::tokens::{chunk_corpus, estimate_tokens, TokenBudget};
use crate::workflow::{phase1_prompt, Orchestrator, Role, ARTIFACT_FILES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    InputError,
    ProviderError,
    BudgetError,
    ParseError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::InputError => 1,
            ExitStatus::ProviderError => 2,
            ExitStatus::BudgetError => 3,
            ExitStatus::ParseError => 4,
        }
    }

    pub fn from_code(code: i32) -> Self {
        match code {
            0 => ExitStatus::Success,
            2 => ExitStatus::ProviderError,
            3 => ExitStatus::BudgetError,
            4 => ExitStatus::ParseError,
            _ => ExitStatus::InputError,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        Self::from_code(e.exit_code())
    }
}

/// Output streams for a command.
pub struct Console<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

// console writes are best effort; a closed pipe must not change the exit code
macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{
        let _ = writeln!($w, $($arg)*);
    }};
}

/// Environment, transport and clock used by commands.
#[derive(Clone)]
pub struct Services {
    pub env: EnvMap,
    pub transport: Arc<dyn Transport>,
    pub clock: Arc<dyn Clock>,
}

impl Services {
    pub fn system() -> Result<Self, Error> {
        let transport = HttpTransport::new(Duration::from_secs(600))
            .map_err(|e| Error::Config(format!("cannot initialise HTTP client: {e}")))?;
        Ok(Self {
            env: process_env(),
            transport: Arc::new(transport),
            clock: Arc::new(SystemClock),
        })
    }
}

pub const PHASE1_TEMPLATE_FILE: &str = "bug_slayer_prompt.txt";
pub const PHASE2_TEMPLATE_FILE: &str = "audit_consolidator_prompt.txt";
pub const PHASE3_TEMPLATE_FILE: &str = "final_consolidator_prompt.txt";

const SCAFFOLD_CONFIG: &str = r#"# Provider settings. temperature and max_tokens are mandatory.
apis:
  openai:
    kind: openai-chat
    base_url: https://api.openai.com
    api_key: ${OPENAI_API_KEY}
    model: gpt-3.5-turbo
    temperature: 0.1
    max_tokens: 3000
    context_limit_tokens: 16000
    chars_per_token_ratio: 0.25
  anthropic:
    kind: anthropic-messages
    base_url: https://api.anthropic.com
    api_key: ${ANTHROPIC_API_KEY}
    model: claude-sonnet-4-20250514
    temperature: 0.1
    max_tokens: 4000
    context_limit_tokens: 200000
    chars_per_token_ratio: 0.25

workflow:
  analyst_a: openai
  analyst_b: anthropic
  arbitrator: openai
  prompts:
    phase1: prompts/bug_slayer_prompt.txt
    phase2: prompts/audit_consolidator_prompt.txt
    phase3: prompts/final_consolidator_prompt.txt
  retry:
    max_attempts: 3
    base_delay_ms: 1000
    multiplier: 2
  safety_margin: 0.75
  results_root: results
"#;

const SCAFFOLD_ENV: &str = "# Copy to .env and fill in.\nOPENAI_API_KEY=\nANTHROPIC_API_KEY=\n";

const SCAFFOLD_BUG: &str = "Describe the problem here: what you did, what you expected, what happened.\nPaste any error output or stack trace below.\n";

const SCAFFOLD_PHASE1: &str = "You are auditing a codebase for the bug described below.\n\
Work independently. Produce: an executive summary, the root cause with file and line references,\n\
a prioritized list of fixes with exact code changes, an implementation order, and how to test each fix.\n";

const SCAFFOLD_PHASE2: &str = "Below are your own earlier audit and a peer's audit of the same bug.\n\
Compare them for technical accuracy, depth of investigation, fix quality and strength of evidence.\n\
List agreements, disagreements and omissions, then give a consolidated recommendation with the\n\
percentage of your recommendation that comes from each audit.\n";

const SCAFFOLD_PHASE3: &str =
    "You are the final arbitrator. Using the task, the codebase, both audits and both\n\
consolidations, accept only fixes that are technically sound, peer validated, non-conflicting,\n\
minimal and backed by evidence. Reject everything else with a one-line reason.\n\
\n\
Answer in exactly this layout:\n\
\n\
## CONTRIBUTION ANALYSIS\n\
AI^A CONTRIBUTION: <n>%\n\
AI^B CONTRIBUTION: <n>%\n\
CONVERGENT (BOTH AGREED): <n>%\n\
FINAL ARBITRATION: <n>%\n\
\n\
## DEFINITIVE FIX LIST\n\
### Fix #1: <title>\n\
<file, exact change, justification>\n\
\n\
## REJECTED FIXES\n\
1. <proposal> - <reason>\n";

/// Scaffolds a new project directory.
pub fn cmd_init(target: &Path, console: &mut Console<'_>) -> ExitStatus {
    if target.exists() {
        let non_empty = match fs::read_dir(target) {
            Ok(mut it) => it.next().is_some(),
            Err(_) => true,
        };
        if non_empty {
            say!(
                console.err,
                "error: {} exists and is not empty",
                target.display()
            );
            return ExitStatus::InputError;
        }
    }
    let files: [(&str, &str); 6] = [
        ("config.yaml", SCAFFOLD_CONFIG),
        (".env.example", SCAFFOLD_ENV),
        ("bug.txt", SCAFFOLD_BUG),
        ("prompts/bug_slayer_prompt.txt", SCAFFOLD_PHASE1),
        ("prompts/audit_consolidator_prompt.txt", SCAFFOLD_PHASE2),
        ("prompts/final_consolidator_prompt.txt", SCAFFOLD_PHASE3),
    ];
    let result = (|| -> std::io::Result<()> {
        fs::create_dir_all(target.join("prompts"))?;
        fs::create_dir_all(target.join("codebase"))?;
        for (rel, body) in files {
            fs::write(target.join(rel), body)?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        say!(
            console.err,
            "error: cannot scaffold {}: {e}",
            target.display()
        );
        return ExitStatus::InputError;
    }
    for (rel, _) in files {
        say!(console.out, "{}", target.join(rel).display());
    }
    say!(console.out, "{}", target.join("codebase").display());
    ExitStatus::Success
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Connectivity {
    Ok,
    Skipped,
    Error { http_status: u16, payload: String },
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Connectivity::Ok => f.write_str("ok"),
            Connectivity::Skipped => f.write_str("skipped"),
            Connectivity::Error {
                http_status,
                payload,
            } => write!(f, "error (status {http_status}): {payload}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderCheck {
    pub provider_id: String,
    pub kind: ProviderKind,
    pub roles: Vec<Role>,
    pub connectivity: Connectivity,
    pub effective_tokens: u64,
    /// Estimated tokens of the assembled corpus, if a corpus was available.
    pub corpus_tokens: Option<u64>,
    pub phase1_chunks: Option<usize>,
    /// Why Phase-1 chunking is impossible, if it is.
    pub budget_problem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreflightReport {
    pub providers: Vec<ProviderCheck>,
    pub pass: bool,
}

impl PreflightReport {
    pub fn exit_status(&self) -> ExitStatus {
        if self
            .providers
            .iter()
            .any(|p| matches!(p.connectivity, Connectivity::Error { .. }))
        {
            ExitStatus::ProviderError
        } else if self.providers.iter().any(|p| p.budget_problem.is_some()) {
            ExitStatus::BudgetError
        } else {
            ExitStatus::Success
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in &self.providers {
            let roles: Vec<String> = p.roles.iter().map(ToString::to_string).collect();
            out.push_str(&format!(
                "provider {} ({}) roles={}\n  connectivity: {}\n  effective budget: {} tokens\n",
                p.provider_id,
                p.kind,
                roles.join(","),
                p.connectivity,
                p.effective_tokens
            ));
            match (p.corpus_tokens, p.phase1_chunks, &p.budget_problem) {
                (_, _, Some(problem)) => {
                    out.push_str(&format!("  phase1 chunking: infeasible: {problem}\n"))
                }
                (Some(t), Some(n), None) => out.push_str(&format!(
                    "  corpus estimate: {t} tokens -> {n} phase1 chunk(s)\n"
                )),
                _ => out.push_str("  corpus estimate: skipped (no codebase)\n"),
            }
        }
        out.push_str(if self.pass {
            "preflight: PASS\n"
        } else {
            "preflight: FAIL\n"
        });
        out
    }
}

fn role_providers(config: &Config) -> Vec<(ProviderSettings, Vec<Role>)> {
    let mut out: Vec<(ProviderSettings, Vec<Role>)> = Vec::new();
    for (role, settings) in [
        (Role::AnalystA, config.analyst_a()),
        (Role::AnalystB, config.analyst_b()),
        (Role::Arbitrator, config.arbitrator()),
    ] {
        match out.iter_mut().find(|(s, _)| s.id == settings.id) {
            Some((_, roles)) => roles.push(role),
            None => out.push((settings.clone(), vec![role])),
        }
    }
    out
}

/// Pings every real provider once and checks Phase-1 chunking feasibility
/// against `corpus`.
pub fn preflight(config: &Config, corpus: Option<&Corpus>, services: &Services) -> PreflightReport {
    let template = fs::read_to_string(&config.workflow.prompts.phase1).unwrap_or_default();
    let mut providers = Vec::new();
    for (settings, roles) in role_providers(config) {
        let connectivity = match settings.kind {
            ProviderKind::Replay => Connectivity::Skipped,
            _ => {
                let mut req =
                    ChatRequest::for_provider(&settings, "Reply with the single word: ok");
                req.max_tokens = req.max_tokens.min(16);
                match complete(
                    &settings,
                    &req,
                    &config.workflow.retry,
                    services.transport.as_ref(),
                    services.clock.as_ref(),
                ) {
                    Ok(_) => Connectivity::Ok,
                    Err(Error::Provider(p)) => Connectivity::Error {
                        http_status: p.final_status,
                        payload: p.response_payload,
                    },
                    Err(other) => Connectivity::Error {
                        http_status: 0,
                        payload: other.to_string(),
                    },
                }
            }
        };

        let ratio = settings.chars_per_token_ratio;
        let budget = TokenBudget::new(settings.context_limit_tokens, config.workflow.safety_margin);
        let effective_tokens = budget.as_ref().map(|b| b.effective_tokens).unwrap_or(0);
        let (corpus_tokens, phase1_chunks, budget_problem) = match (corpus, budget) {
            (_, Err(e)) => (None, None, Some(e.to_string())),
            (None, Ok(_)) => (None, None, None),
            (Some(c), Ok(b)) => {
                let tokens = estimate_tokens(&c.assembled_text, ratio);
                let scaffold = estimate_tokens(&phase1_prompt(&template, "", ""), ratio);
                match b.reserve(scaffold).and_then(|b| chunk_corpus(c, &b, ratio)) {
                    Ok(chunks) => (Some(tokens), Some(chunks.len()), None),
                    Err(e) => (Some(tokens), None, Some(e.to_string())),
                }
            }
        };
        providers.push(ProviderCheck {
            provider_id: settings.id.clone(),
            kind: settings.kind,
            roles,
            connectivity,
            effective_tokens,
            corpus_tokens,
            phase1_chunks,
            budget_problem,
        });
    }
    let pass = providers.iter().all(|p| {
        !matches!(p.connectivity, Connectivity::Error { .. }) && p.budget_problem.is_none()
    });
    PreflightReport { providers, pass }
}

fn load(
    config_path: &Path,
    replay: Option<&Path>,
    services: &Services,
    console: &mut Console<'_>,
) -> Option<Config> {
    match load_config(config_path, &services.env) {
        Ok(c) => Some(match replay {
            Some(dir) => c.with_replay(dir),
            None => c,
        }),
        Err(e) => {
            say!(console.err, "error: {e}");
            None
        }
    }
}

fn default_codebase(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."))
        .join("codebase")
}

/// Preflight: connectivity and token headroom.
///
/// Without `codebase`, `<config dir>/codebase` is used when it exists.
pub fn cmd_check(
    config_path: &Path,
    codebase: Option<&Path>,
    replay: Option<&Path>,
    services: &Services,
    console: &mut Console<'_>,
) -> (Option<PreflightReport>, ExitStatus) {
    let Some(config) = load(config_path, replay, services, console) else {
        return (None, ExitStatus::InputError);
    };
    let corpus = match codebase {
        Some(root) => match scan_codebase_excluding(root, &config.workflow.exclude_dirs) {
            Ok(c) => Some(c),
            Err(e) => {
                say!(console.err, "error: {e}");
                return (None, ExitStatus::from_error(&e));
            }
        },
        // an absent or still-empty scaffold directory just skips the estimate
        None => scan_codebase_excluding(
            &default_codebase(config_path),
            &config.workflow.exclude_dirs,
        )
        .ok(),
    };
    let report = preflight(&config, corpus.as_ref(), services);
    let _ = console.out.write_all(report.render().as_bytes());
    for p in &report.providers {
        if let Connectivity::Error { payload, .. } = &p.connectivity {
            say!(
                console.err,
                "provider {} unreachable: {payload}",
                p.provider_id
            );
        }
    }
    let status = report.exit_status();
    (Some(report), status)
}

#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub skip_check: bool,
    pub replay: Option<PathBuf>,
}

/// Runs the full workflow and lists the produced artifacts.
pub fn cmd_run(
    config_path: &Path,
    bug_path: &Path,
    codebase_dir: &Path,
    flags: &RunFlags,
    services: &Services,
    console: &mut Console<'_>,
) -> ExitStatus {
    if !bug_path.is_file() {
        say!(
            console.err,
            "error: bug description {} not found",
            bug_path.display()
        );
        return ExitStatus::InputError;
    }
    let Some(config) = load(config_path, flags.replay.as_deref(), services, console) else {
        return ExitStatus::InputError;
    };

    if !flags.skip_check {
        let corpus = match scan_codebase_excluding(codebase_dir, &config.workflow.exclude_dirs) {
            Ok(c) => c,
            Err(e) => {
                say!(console.err, "error: {e}");
                return ExitStatus::from_error(&e);
            }
        };
        let report = preflight(&config, Some(&corpus), services);
        if !report.pass {
            let _ = console.err.write_all(report.render().as_bytes());
            return report.exit_status();
        }
    }

    let orchestrator = match Orchestrator::from_config(
        &config,
        services.transport.clone(),
        services.clock.clone(),
    ) {
        Ok(o) => o,
        Err(e) => {
            say!(console.err, "error: {e}");
            return ExitStatus::from_error(&e);
        }
    };
    match orchestrator.run(bug_path, codebase_dir) {
        Ok(manifest) => {
            let dir = config.workflow.results_root.join(&manifest.run_dir);
            say!(console.out, "{}", dir.display());
            for name in ARTIFACT_FILES {
                say!(console.out, "{}", dir.join(name).display());
            }
            ExitStatus::Success
        }
        Err(failure) => {
            say!(console.err, "error: {}", failure.error);
            if let Some(dir) = &failure.run_dir {
                say!(
                    console.err,
                    "partial results and failure manifest in {}",
                    dir.display()
                );
            }
            ExitStatus::from_error(&failure.error)
        }
    }
}

/// Expands files, directories (searched for `definitive_fixes*.md`) and
/// glob patterns into a sorted, de-duplicated list of documents.
pub fn resolve_documents(inputs: &[String]) -> Result<Vec<PathBuf>, Error> {
    let mut out = Vec::new();
    for input in inputs {
        let path = Path::new(input);
        if path.is_file() {
            out.push(path.to_path_buf());
        } else if path.is_dir() {
            for entry in walkdir::WalkDir::new(path).follow_links(false) {
                let entry = entry.map_err(|e| Error::Input(e.to_string()))?;
                let name = entry.file_name().to_string_lossy();
                if entry.file_type().is_file()
                    && name.starts_with("definitive_fixes")
                    && name.ends_with(".md")
                {
                    out.push(entry.into_path());
                }
            }
        } else {
            let paths = glob::glob(input)
                .map_err(|e| Error::Input(format!("bad pattern `{input}`: {e}")))?;
            for p in paths.flatten() {
                if p.is_file() {
                    out.push(p);
                }
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// `definitive_fixes_004.md` -> `definitive_fixes_004`;
/// `bug0004_results/definitive_fixes.md` -> `bug0004_results`.
pub fn run_id_for(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem == "definitive_fixes" {
        if let Some(parent) = path.parent().and_then(Path::file_name) {
            return parent.to_string_lossy().into_owned();
        }
    }
    stem
}

/// Reads a YAML mapping of run id to group label.
pub fn read_group_labels(path: &Path) -> Result<BTreeMap<String, String>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_yaml::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default)]
pub struct MetricsOptions {
    pub groups: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub json: bool,
    pub ci: CiMethod,
}

/// Builds the report for `docs`; unparseable documents are collected in
/// `failures` rather than aborting.
pub fn build_metrics_report(
    docs: &[PathBuf],
    labels: Option<&BTreeMap<String, String>>,
    ci: CiMethod,
) -> Result<MetricsReport, Error> {
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for path in docs {
        let parsed = fs::read_to_string(path)
            .map_err(|e| Error::io(path, e))
            .and_then(|text| RunMetrics::from_document(run_id_for(path), &text));
        match parsed {
            Ok(mut r) => {
                r.group = labels.and_then(|m| m.get(&r.run_id)).cloned();
                runs.push(r);
            }
            Err(e) => failures.push(ParseFailure {
                source: path.display().to_string(),
                message: e.to_string(),
            }),
        }
    }
    if runs.is_empty() {
        return Err(Error::Parse(format!(
            "none of the {} document(s) could be parsed",
            docs.len()
        )));
    }
    let aggregate = metrics::aggregate(&runs, labels, ci)?;
    Ok(MetricsReport {
        runs,
        aggregate,
        failures,
    })
}

pub fn cmd_metrics(
    inputs: &[String],
    opts: &MetricsOptions,
    console: &mut Console<'_>,
) -> ExitStatus {
    let docs = match resolve_documents(inputs) {
        Ok(d) if !d.is_empty() => d,
        Ok(_) => {
            say!(
                console.err,
                "error: no definitive-fixes documents matched {:?}",
                inputs
            );
            return ExitStatus::InputError;
        }
        Err(e) => {
            say!(console.err, "error: {e}");
            return ExitStatus::InputError;
        }
    };
    let labels = match opts.groups.as_deref().map(read_group_labels).transpose() {
        Ok(l) => l,
        Err(e) => {
            say!(console.err, "error: {e}");
            return ExitStatus::InputError;
        }
    };

    let report = match build_metrics_report(&docs, labels.as_ref(), opts.ci) {
        Ok(r) => r,
        Err(e) => {
            say!(console.err, "error: {e}");
            return ExitStatus::from_error(&e);
        }
    };

    if !report.failures.is_empty() {
        say!(
            console.err,
            "PARTIAL RESULTS: {} of {} document(s) could not be parsed",
            report.failures.len(),
            docs.len()
        );
        for f in &report.failures {
            say!(console.err, "  {}: {}", f.source, f.message);
        }
    }

    if opts.json {
        match metrics::to_json(&report) {
            Ok(j) => say!(console.out, "{j}"),
            Err(e) => {
                say!(console.err, "error: {e}");
                return ExitStatus::InputError;
            }
        }
    } else {
        let _ = console
            .out
            .write_all(metrics::render_table(&report).as_bytes());
    }

    if let Some(csv_path) = &opts.csv {
        let written = metrics::to_csv(&report.runs)
            .and_then(|c| fs::write(csv_path, c).map_err(|e| Error::io(csv_path, e)));
        if let Err(e) = written {
            say!(console.err, "error: {e}");
            return ExitStatus::InputError;
        }
    }

    if report.failures.is_empty() {
        ExitStatus::Success
    } else {
        ExitStatus::ParseError
    }
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use tempfile::TempDir;

use common::*;
use crossfix::cli::{build_metrics_report, read_group_labels, resolve_documents};
use crossfix::config::{ProviderKind, ProviderSettings, RetryPolicy};
use crossfix::corpus::{header_line, Corpus, SourceFile};
use crossfix::error::Error;
use crossfix::metrics::{compute_flags, CiMethod, ContributionBreakdown, MetricsReport};
use crossfix::providers::{complete, normalize_openai_endpoint, ChatRequest, FakeClock};
use crossfix::tokens::{chunk_corpus, elision_marker, estimate_tokens, TokenBudget};
use crossfix::workflow::{
    Orchestrator, Phase, Role, RunManifest, RunStatus, ARTIFACT_FILES, MANIFEST_FILE,
};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn close(actual: f64, expected: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol + 1e-9
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bug_study")
}

fn study_report(method: CiMethod) -> Result<MetricsReport, String> {
    let dir = fixture_dir();
    let docs =
        resolve_documents(&[dir.to_string_lossy().into_owned()]).map_err(|e| e.to_string())?;
    let labels = read_group_labels(&dir.join("groups.yaml")).map_err(|e| e.to_string())?;
    build_metrics_report(&docs, Some(&labels), method).map_err(|e| e.to_string())
}

/// Published per-bug rows: propositions, acceptance %, AI_A, AI_B, arbitrator, input type.
const STUDY_ROWS: [(u32, f64, f64, f64, f64, &str); 15] = [
    (4, 25.0, 25.0, 30.0, 5.0, "T1"),
    (2, 50.0, 15.0, 75.0, 0.0, "T2"),
    (2, 50.0, 25.0, 65.0, 10.0, "T2"),
    (4, 25.0, 15.0, 25.0, 50.0, "T1"),
    (4, 25.0, 15.0, 80.0, 5.0, "T2"),
    (5, 20.0, 25.0, 60.0, 0.0, "T1"),
    (9, 55.6, 5.0, 60.0, 25.0, "T2"),
    (3, 33.3, 15.0, 25.0, 50.0, "T1"),
    (3, 33.3, 25.0, 70.0, 5.0, "T1"),
    (3, 33.3, 25.0, 70.0, 5.0, "T1"),
    (5, 20.0, 25.0, 70.0, 5.0, "T1"),
    (5, 40.0, 25.0, 65.0, 0.0, "T1"),
    (8, 25.0, 25.0, 35.0, 10.0, "T2"),
    (8, 25.0, 25.0, 60.0, 0.0, "T2"),
    (4, 25.0, 40.0, 35.0, 5.0, "T2"),
];

fn c1_determinism() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let project = Project::new(tmp.path());
    let exe = env!("CARGO_BIN_EXE_crossfix");
    let mut slowest = Duration::ZERO;
    for _ in 0..2 {
        let start = Instant::now();
        let out = Command::new(exe)
            .arg("--config")
            .arg(&project.config_path)
            .arg("--replay")
            .arg(&project.fixtures)
            .arg("run")
            .arg("--bug")
            .arg(&project.bug)
            .arg("--codebase")
            .arg(&project.codebase)
            .output()
            .map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        ensure!(
            out.status.success(),
            "run exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let first = tree(&project.results.join("bug0001_results"));
    let second = tree(&project.results.join("bug0002_results"));
    ensure!(
        first.len() == second.len(),
        "file sets differ: {} vs {}",
        first.len(),
        second.len()
    );
    let mut differing = Vec::new();
    for ((pa, ba), (pb, bb)) in first.iter().zip(&second) {
        ensure!(pa == pb, "file sets differ at {pa} / {pb}");
        let same = if pa == MANIFEST_FILE {
            stable_manifest(ba) == stable_manifest(bb)
        } else {
            ba == bb
        };
        if !same {
            differing.push(pa.clone());
        }
    }
    ensure!(differing.is_empty(), "differing files: {differing:?}");
    ensure!(
        slowest < Duration::from_secs(5),
        "slowest run took {slowest:?}"
    );
    Ok(format!(
        "{} files identical, slowest run {:?}",
        first.len(),
        slowest
    ))
}

fn c2_study_averages() -> Outcome {
    let report = study_report(CiMethod::Wald)?;
    let g = &report.aggregate.overall;
    ensure!(
        report.failures.is_empty(),
        "unparsed fixtures: {:?}",
        report.failures
    );
    ensure!(g.n_runs == 15, "expected 15 runs, got {}", g.n_runs);

    // the fixtures must encode the published rows
    for (i, (run, row)) in report.runs.iter().zip(STUDY_ROWS.iter()).enumerate() {
        let (props, rate, a, b, arb, _) = *row;
        ensure!(
            run.tally.total() == props,
            "bug {}: propositions {} != {}",
            i + 1,
            run.tally.total(),
            props
        );
        ensure!(
            close(run.acceptance_rate_pct, rate, 0.05),
            "bug {}: rate {}",
            i + 1,
            run.acceptance_rate_pct
        );
        ensure!(
            run.breakdown.ai_a_pct == a
                && run.breakdown.ai_b_pct == b
                && run.breakdown.arbitration_pct == arb,
            "bug {}: breakdown {:?}",
            i + 1,
            run.breakdown
        );
    }

    let published = [
        ("propositions", g.mean_propositions, 4.6),
        ("acceptance", g.mean_acceptance_pct, 32.4),
        ("AI_A", g.mean_ai_a_pct, 22.0),
        ("AI_B", g.mean_ai_b_pct, 55.3),
        ("arbitrator", g.mean_arbitration_pct, 11.7),
    ];
    let detail: Vec<String> = published
        .iter()
        .map(|(name, got, want)| format!("{name}={got:.3} (published {want})"))
        .collect();
    let off: Vec<&str> = published
        .iter()
        .filter(|(_, got, want)| !close(*got, *want, 0.05))
        .map(|(name, _, _)| *name)
        .collect();
    ensure!(
        off.is_empty(),
        "outside ±0.05: {off:?}; {}",
        detail.join(", ")
    );
    Ok(detail.join(", "))
}

fn c3_aggregate() -> Outcome {
    let report = study_report(CiMethod::Wald)?;
    let g = &report.aggregate.overall;
    ensure!(
        g.total_accepted == 22 && g.total_rejected == 47,
        "totals accepted={} rejected={}",
        g.total_accepted,
        g.total_rejected
    );
    ensure!(
        close(g.overall_acceptance_pct, 31.9, 0.05),
        "overall {}",
        g.overall_acceptance_pct
    );
    let (lo, hi) = g.ci_95;
    ensure!(
        close(lo, 20.9, 0.1) && close(hi, 42.9, 0.1),
        "Wald CI ({lo}, {hi})"
    );

    // independent normal-approximation oracle
    let p = 22.0 / 69.0;
    let half = 1.96 * (p * (1.0 - p) / 69.0_f64).sqrt();
    ensure!(
        close(lo, 100.0 * (p - half), 0.05) && close(hi, 100.0 * (p + half), 0.05),
        "CI disagrees with oracle"
    );

    let group = |name: &str| {
        report
            .aggregate
            .groups
            .get(name)
            .ok_or(format!("missing group {name}"))
    };
    let (t1, t2) = (group("T1")?, group("T2")?);
    // oracle from the published rows
    let mut by_type: BTreeMap<&str, (f64, u32)> = BTreeMap::new();
    for (props, rate, _, _, _, t) in STUDY_ROWS {
        let e = by_type.entry(t).or_default();
        e.0 += (props as f64 * rate / 100.0).round();
        e.1 += props;
    }
    for (name, g, pct, eff) in [("T1", t1, 28.1, 3.56), ("T2", t2, 35.1, 2.85)] {
        ensure!(
            close(g.overall_acceptance_pct, pct, 0.05),
            "{name} acceptance {}",
            g.overall_acceptance_pct
        );
        let e = g
            .propositions_per_accepted
            .ok_or(format!("{name} efficiency undefined"))?;
        ensure!(close(e, eff, 0.01), "{name} efficiency {e}");
        let (acc, total) = by_type[name];
        ensure!(
            g.total_accepted as f64 == acc && g.total_propositions == total,
            "{name} totals disagree with rows"
        );
    }
    Ok(format!(
        "22/69 = {:.1}% CI ({lo:.2}, {hi:.2}); T1 {:.1}% eff {:.2}; T2 {:.1}% eff {:.2}",
        g.overall_acceptance_pct,
        t1.overall_acceptance_pct,
        t1.propositions_per_accepted.unwrap(),
        t2.overall_acceptance_pct,
        t2.propositions_per_accepted.unwrap()
    ))
}

fn c4_flags() -> Outcome {
    let report = study_report(CiMethod::Wald)?;
    let flagged: Vec<&str> = report
        .runs
        .iter()
        .filter(|r| r.arbitration_flag)
        .map(|r| r.run_id.as_str())
        .collect();
    ensure!(
        flagged == ["definitive_fixes_004", "definitive_fixes_008"],
        "arbitration flags on {flagged:?}"
    );
    for r in &report.runs {
        ensure!(
            r.breakdown.arbitration_pct >= 50.0 || !r.arbitration_flag,
            "{} flagged below 50",
            r.run_id
        );
    }
    for (conv, expected) in [(74.9, false), (75.0, true), (75.1, true)] {
        let b =
            ContributionBreakdown::new(100.0 - conv, 0.0, conv, 0.0).map_err(|e| e.to_string())?;
        let (_, flag) = compute_flags(&b);
        ensure!(flag == expected, "convergence {conv}: flag {flag}");
    }
    Ok("arbitration flags on 004, 008; convergence 74.9/75.0/75.1 -> no/yes/yes".into())
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Split points by exhaustive search over prefix sums: from each start, take
/// the furthest end whose range fits and contains no oversized file.
fn oracle_splits(sizes: &[u64], per_token: u64, limit: u64) -> Vec<(usize, usize)> {
    let mut prefix = vec![0u64];
    for s in sizes {
        prefix.push(prefix.last().unwrap() + s);
    }
    let oversized = |i: usize| ceil_div(sizes[i], per_token) > limit;
    let mut out = Vec::new();
    let mut start = 0;
    while start < sizes.len() {
        let mut best = start + 1;
        if !oversized(start) {
            for end in start + 1..=sizes.len() {
                let fits = ceil_div(prefix[end] - prefix[start], per_token) <= limit;
                if fits && (start..end).all(|i| !oversized(i)) {
                    best = end;
                }
            }
        }
        out.push((start, best));
        start = best;
    }
    out
}

fn corpus_strategy() -> impl Strategy<Value = (Vec<Vec<String>>, u64, u64)> {
    let line = "[a-z =();]{0,40}";
    let file = prop::collection::vec(line, 1..12);
    (
        prop::collection::vec(file, 1..21),
        30u64..400,
        prop::sample::select(vec![1u64, 2, 4]),
    )
}

fn check_chunking(files: &[Vec<String>], limit: u64, per_token: u64) -> Result<(), TestCaseError> {
    let ratio = 1.0 / per_token as f64;
    let sources: Vec<SourceFile> = files
        .iter()
        .enumerate()
        .map(|(i, lines)| SourceFile::new(format!("src/f{i:02}.py"), lines.join("\n")))
        .collect();
    let corpus = Corpus::from_files("/", sources);
    let budget = TokenBudget::new(limit, 1.0).unwrap();
    let chunks = match chunk_corpus(&corpus, &budget, ratio) {
        Ok(c) => c,
        Err(Error::Budget(_)) => {
            // only legitimate when some file cannot keep even one line
            let impossible = corpus.files.iter().any(|f| {
                let first = f.content.split_inclusive('\n').next().unwrap_or("");
                let need = header_line(&f.rel_path).chars().count()
                    + first.trim_end_matches('\n').chars().count()
                    + 1
                    + elision_marker(&f.rel_path).chars().count();
                ceil_div(f.assembled().chars().count() as u64, per_token) > limit
                    && ceil_div(need as u64, per_token) > limit
            });
            prop_assert!(impossible, "budget error on a feasible corpus");
            return Ok(());
        }
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };

    let mut order = Vec::new();
    let mut rebuilt = String::new();
    for c in &chunks {
        prop_assert!(
            c.estimated_tokens <= limit,
            "chunk {} has {} > {}",
            c.index,
            c.estimated_tokens,
            limit
        );
        prop_assert_eq!(c.estimated_tokens, estimate_tokens(&c.text, ratio));
        order.extend(c.files.iter().cloned());
        if c.truncated {
            prop_assert_eq!(c.files.len(), 1);
            let f = corpus
                .files
                .iter()
                .find(|f| f.rel_path == c.files[0])
                .unwrap();
            let header = header_line(&f.rel_path);
            let marker = elision_marker(&f.rel_path);
            prop_assert!(c.text.starts_with(&header) && c.text.ends_with(&marker));
            let kept = &c.text[header.len()..c.text.len() - marker.len()];
            let kept_bare = kept.strip_suffix('\n').unwrap_or(kept);
            prop_assert!(
                f.content.starts_with(kept_bare),
                "kept text is not a prefix"
            );
            let rest = &f.content[kept_bare.len()..];
            prop_assert!(
                rest.is_empty() || rest.starts_with('\n'),
                "cut is not at a line boundary"
            );
            rebuilt.push_str(&f.assembled());
        } else {
            rebuilt.push_str(&c.text);
        }
    }
    let expected: Vec<String> = corpus.files.iter().map(|f| f.rel_path.clone()).collect();
    prop_assert_eq!(&order, &expected);
    prop_assert_eq!(&rebuilt, &corpus.assembled_text);

    let sizes: Vec<u64> = corpus
        .files
        .iter()
        .map(|f| f.assembled().chars().count() as u64)
        .collect();
    let want = oracle_splits(&sizes, per_token, limit);
    let mut got = Vec::new();
    let mut start = 0;
    for c in &chunks {
        got.push((start, start + c.files.len()));
        start += c.files.len();
    }
    prop_assert_eq!(got, want);
    Ok(())
}

fn c5_chunking() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&corpus_strategy(), |(files, limit, per_token)| {
            check_chunking(&files, limit, per_token)
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 generated corpora (1-20 files) agree with the prefix-sum oracle".into())
}

fn c6_budgets() -> Outcome {
    let a = TokenBudget::new(16_000, 0.75).map_err(|e| e.to_string())?;
    let b = TokenBudget::new(200_000, 0.75).map_err(|e| e.to_string())?;
    ensure!(
        a.effective_tokens == 12_000,
        "16000 -> {}",
        a.effective_tokens
    );
    ensure!(
        b.effective_tokens == 150_000,
        "200000 -> {}",
        b.effective_tokens
    );
    Ok("16000 -> 12000, 200000 -> 150000".into())
}

fn c7_endpoints() -> Outcome {
    let inputs = [
        "https://api.openai.com",
        "https://api.openai.com/",
        "https://api.openai.com/v1",
        "https://api.openai.com/v1/",
        "https://gateway.example.com/proxy/openai/v1/",
    ];
    for input in inputs {
        let out = normalize_openai_endpoint(input).map_err(|e| e.to_string())?;
        ensure!(out.matches("/v1/").count() == 1, "{input} -> {out}");
        ensure!(out.ends_with("/v1/chat/completions"), "{input} -> {out}");
        let again = normalize_openai_endpoint(&out).map_err(|e| e.to_string())?;
        ensure!(again == out, "not idempotent: {out} -> {again}");
    }
    Ok(format!(
        "{} endpoint forms normalized, idempotent",
        inputs.len()
    ))
}

fn openai_settings() -> ProviderSettings {
    ProviderSettings {
        id: "openai".into(),
        kind: ProviderKind::OpenAiChat,
        base_url: "https://api.openai.com".into(),
        api_key: "k".into(),
        model: "gpt-3.5-turbo".into(),
        temperature: 0.1,
        max_tokens: 3000,
        context_limit_tokens: 16_000,
        chars_per_token_ratio: 0.25,
        anthropic_version: None,
    }
}

fn c8_retry() -> Outcome {
    let settings = openai_settings();
    let request = ChatRequest::for_provider(&settings, "hello");
    let retry = RetryPolicy::default();

    let transport = ScriptedTransport::new(vec![
        status(503, "busy"),
        status(429, "slow down"),
        openai_ok("done"),
    ]);
    let clock = FakeClock::new();
    let ok =
        complete(&settings, &request, &retry, &transport, &clock).map_err(|e| e.to_string())?;
    ensure!(ok.text == "done" && ok.attempt_count == 3, "got {ok:?}");
    ensure!(
        clock.waits() == [Duration::from_millis(1000), Duration::from_millis(2000)],
        "waits {:?}",
        clock.waits()
    );

    let payload = "{\"error\":{\"message\":\"overloaded \\u00e9\"}}";
    let transport = ScriptedTransport::new(vec![
        status(500, "a"),
        status(502, "b"),
        status(503, payload),
    ]);
    match complete(&settings, &request, &retry, &transport, &FakeClock::new()) {
        Err(Error::Provider(p)) => ensure!(
            p.response_payload == payload && p.final_status == 503 && p.attempts == 3,
            "error {p:?}"
        ),
        other => return Err(format!("expected provider error, got {other:?}")),
    }

    let transport = ScriptedTransport::new(vec![status(401, "bad key"), openai_ok("never")]);
    let clock = FakeClock::new();
    let err = complete(&settings, &request, &retry, &transport, &clock);
    ensure!(matches!(err, Err(Error::Provider(_))), "401 did not fail");
    ensure!(
        transport.requests().len() == 1 && clock.waits().is_empty(),
        "401 retried"
    );
    Ok("2 failures then success: 3 attempts, waits 1000/2000 ms; 3 failures keep payload; 401 tried once".into())
}

fn orchestrator(project: &Project) -> Result<Orchestrator, String> {
    let config = project.config();
    let [a, b, arb] = recording_providers(project, None).1;
    Orchestrator::with_providers(&config, a, b, arb).map_err(|e| e.to_string())
}

fn c9_run_dirs() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let project = Project::new(tmp.path());
    let orch = orchestrator(&project)?;
    let mut created = Vec::new();
    for _ in 0..12 {
        let m = orch
            .run(&project.bug, &project.codebase)
            .map_err(|e| e.to_string())?;
        created.push(m.run_dir);
    }
    let expected: Vec<String> = (1..=12).map(|i| format!("bug{i:04}_results")).collect();
    ensure!(created == expected, "created {created:?}");
    let mut listed: Vec<String> = fs::read_dir(&project.results)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    listed.sort();
    ensure!(listed == created, "lexicographic order {listed:?}");
    Ok("bug0001_results..bug0012_results in creation order".into())
}

fn c10_isolation() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let project = Project::new(tmp.path());
    let config = project.config();
    let (log, [a, b, arb]) = recording_providers(&project, None);
    Orchestrator::with_providers(&config, a, b, arb)
        .map_err(|e| e.to_string())?
        .run(&project.bug, &project.codebase)
        .map_err(|e| e.to_string())?;

    let calls = log.lock().unwrap().clone();
    let prompt = |phase: Phase, role: Role| -> Vec<&String> {
        calls
            .iter()
            .filter(|(k, _)| k.phase == phase && k.role == role)
            .map(|(_, p)| p)
            .collect()
    };
    for p in prompt(Phase::Phase1, Role::AnalystA) {
        ensure!(
            !p.contains(SENTINEL_B),
            "analyst_a phase1 prompt saw B's sentinel"
        );
    }
    for p in prompt(Phase::Phase1, Role::AnalystB) {
        ensure!(
            !p.contains(SENTINEL_A),
            "analyst_b phase1 prompt saw A's sentinel"
        );
    }
    for (role, own, peer) in [
        (Role::AnalystA, SENTINEL_A, SENTINEL_B),
        (Role::AnalystB, SENTINEL_B, SENTINEL_A),
    ] {
        let prompts = prompt(Phase::Phase2, role);
        ensure!(
            prompts.len() == 1,
            "{role}: {} phase2 prompts",
            prompts.len()
        );
        let p = prompts[0];
        let own_label = p.find("## YOUR PRIOR ANALYSIS").ok_or("no own label")?;
        let peer_label = p.find("## PEER ANALYSIS").ok_or("no peer label")?;
        let own_at = p.find(own).ok_or(format!("{role}: own sentinel missing"))?;
        let peer_at = p
            .find(peer)
            .ok_or(format!("{role}: peer sentinel missing"))?;
        ensure!(
            own_label < own_at && own_at < peer_label && peer_label < peer_at,
            "{role}: sentinels under the wrong labels"
        );
    }
    Ok("phase1 prompts isolated; phase2 own/peer sentinels under the right labels".into())
}

fn c11_artifacts() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let project = Project::new(tmp.path());
    let m = orchestrator(&project)?
        .run(&project.bug, &project.codebase)
        .map_err(|e| e.to_string())?;
    let dir = project.results.join(&m.run_dir);
    let files: Vec<String> = tree(&dir).into_iter().map(|(p, _)| p).collect();
    let mut expected: Vec<String> = ARTIFACT_FILES.iter().map(|s| s.to_string()).collect();
    expected.push(MANIFEST_FILE.into());
    expected.extend(m.copied_inputs.iter().cloned());
    expected.sort();
    ensure!(files == expected, "run dir holds {files:?}");
    for input in [
        "inputs/bug.txt",
        "inputs/config.snapshot.yaml",
        "inputs/codebase_listing.txt",
    ] {
        ensure!(
            m.copied_inputs.iter().any(|p| p == input),
            "missing {input}"
        );
    }
    ensure!(
        m.copied_inputs
            .iter()
            .filter(|p| p.starts_with("inputs/prompts/"))
            .count()
            == 3,
        "prompt copies {:?}",
        m.copied_inputs
    );

    for k in 1..=5u32 {
        let tmp = TempDir::new().unwrap();
        let project = Project::new(tmp.path());
        let config = project.config();
        let [a, b, arb] = recording_providers(&project, Some(k)).1;
        let failure = Orchestrator::with_providers(&config, a, b, arb)
            .map_err(|e| e.to_string())?
            .run(&project.bug, &project.codebase)
            .err()
            .ok_or(format!("call {k}: run succeeded"))?;
        ensure!(
            failure.exit_code() == 2,
            "call {k}: exit {}",
            failure.exit_code()
        );
        let dir = failure.run_dir.ok_or("no run dir")?;
        let present: Vec<&str> = ARTIFACT_FILES
            .iter()
            .copied()
            .filter(|f| dir.join(f).exists())
            .collect();
        ensure!(
            present == ARTIFACT_FILES[..k as usize - 1],
            "call {k}: artifacts {present:?}"
        );
        let manifest = RunManifest::read(&dir).map_err(|e| e.to_string())?;
        ensure!(
            manifest.status == RunStatus::Failed,
            "call {k}: manifest not failed"
        );
        ensure!(
            manifest.artifacts.len() == k as usize - 1,
            "call {k}: manifest artifacts"
        );
    }
    Ok("5 artifacts + inputs + manifest; failure at calls 1-5 keeps exactly the completed artifacts".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "determinism", c1_determinism),
        (
            2,
            "metrics reproduction: per-bug table averages",
            c2_study_averages,
        ),
        (3, "metrics reproduction: aggregate", c3_aggregate),
        (4, "flags", c4_flags),
        (5, "chunking properties", c5_chunking),
        (6, "budget arithmetic", c6_budgets),
        (7, "endpoint normalization", c7_endpoints),
        (8, "retry contract", c8_retry),
        (9, "run-directory ordering", c9_run_dirs),
        (10, "isolation sentinel", c10_isolation),
        (11, "artifact completeness", c11_artifacts),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

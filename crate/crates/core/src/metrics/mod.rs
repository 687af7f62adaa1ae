//! Statistics over arbitration documents (`definitive_fixes.md`).
//!
//! Each document carries four contribution headers and two sections:
//! `DEFINITIVE FIX LIST` (one `Fix #N` entry per accepted proposition) and
//! `REJECTED FIXES` (one top-level list item per rejected proposition).

mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use report::{render_table, to_csv, to_json, MetricsReport, ParseFailure};

pub const ARBITRATION_FLAG_PCT: f64 = 50.0;
pub const CONVERGENCE_FLAG_PCT: f64 = 75.0;
/// Allowed deviation of the four contributions from a 100% total.
pub const BREAKDOWN_SUM_TOLERANCE: f64 = 1.0;
const Z_95: f64 = 1.96;

pub const HEADER_AI_A: &str = "AI^A CONTRIBUTION";
pub const HEADER_AI_B: &str = "AI^B CONTRIBUTION";
pub const HEADER_CONVERGENT: &str = "CONVERGENT (BOTH AGREED)";
pub const HEADER_ARBITRATION: &str = "FINAL ARBITRATION";
pub const SECTION_ACCEPTED: &str = "DEFINITIVE FIX LIST";
pub const SECTION_REJECTED: &str = "REJECTED FIXES";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Contributor {
    #[serde(rename = "AI_A")]
    AiA,
    #[serde(rename = "AI_B")]
    AiB,
    Convergent,
    Arbitration,
}

impl fmt::Display for Contributor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Contributor::AiA => "AI_A",
            Contributor::AiB => "AI_B",
            Contributor::Convergent => "Convergent",
            Contributor::Arbitration => "Arbitration",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContributionBreakdown {
    pub ai_a_pct: f64,
    pub ai_b_pct: f64,
    pub convergent_pct: f64,
    pub arbitration_pct: f64,
}

impl ContributionBreakdown {
    pub fn new(
        ai_a_pct: f64,
        ai_b_pct: f64,
        convergent_pct: f64,
        arbitration_pct: f64,
    ) -> Result<Self> {
        let b = Self {
            ai_a_pct,
            ai_b_pct,
            convergent_pct,
            arbitration_pct,
        };
        for (label, v) in b.entries() {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Parse(format!("{label} = {v} is outside [0, 100]")));
            }
        }
        let sum = b.ai_a_pct + b.ai_b_pct + b.convergent_pct + b.arbitration_pct;
        if (sum - 100.0).abs() > BREAKDOWN_SUM_TOLERANCE {
            return Err(Error::Parse(format!(
                "contributions sum to {sum}, expected 100 +/- {BREAKDOWN_SUM_TOLERANCE}"
            )));
        }
        Ok(b)
    }

    fn entries(&self) -> [(&'static str, f64); 4] {
        [
            (HEADER_AI_A, self.ai_a_pct),
            (HEADER_AI_B, self.ai_b_pct),
            (HEADER_CONVERGENT, self.convergent_pct),
            (HEADER_ARBITRATION, self.arbitration_pct),
        ]
    }

    pub fn total_ai_pct(&self) -> f64 {
        self.ai_a_pct + self.ai_b_pct
    }

    pub fn get(&self, c: Contributor) -> f64 {
        match c {
            Contributor::AiA => self.ai_a_pct,
            Contributor::AiB => self.ai_b_pct,
            Contributor::Convergent => self.convergent_pct,
            Contributor::Arbitration => self.arbitration_pct,
        }
    }

    /// The standardized header block, one `LABEL: value%` line each.
    pub fn render(&self) -> String {
        self.entries()
            .iter()
            .map(|(label, v)| format!("**{label}:** {v}%\n"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixTally {
    pub accepted: u32,
    pub rejected: u32,
}

impl FixTally {
    pub fn new(accepted: u32, rejected: u32) -> Self {
        Self { accepted, rejected }
    }

    pub fn total(&self) -> u32 {
        self.accepted + self.rejected
    }
}

/// Half-up rounding to `decimals` places, tolerant of binary noise just
/// below a tie.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let r = if frac + 1e-9 >= 0.5 {
        floor + 1.0
    } else {
        floor
    };
    r / scale
}

fn header_regex(label: &str) -> &'static Regex {
    static RES: OnceLock<[Regex; 4]> = OnceLock::new();
    let all = RES.get_or_init(|| {
        let number = r"[^0-9\n]*?(\d+(?:\.\d+)?)";
        [
            format!(r"(?im)AI\s*\^?\s*\{{?\s*A\s*\}}?\s+CONTRIBUTION{number}"),
            format!(r"(?im)AI\s*\^?\s*\{{?\s*B\s*\}}?\s+CONTRIBUTION{number}"),
            format!(r"(?im)CONVERGENT\s*\(\s*BOTH\s+AGREED\s*\){number}"),
            format!(r"(?im)FINAL\s+ARBITRATION{number}"),
        ]
        .map(|p| Regex::new(&p).expect("static regex"))
    });
    match label {
        HEADER_AI_A => &all[0],
        HEADER_AI_B => &all[1],
        HEADER_CONVERGENT => &all[2],
        _ => &all[3],
    }
}

/// Extracts the four contribution percentages.
pub fn parse_contributions(doc: &str) -> Result<ContributionBreakdown> {
    if doc.trim().is_empty() {
        return Err(Error::Parse("document is empty".into()));
    }
    let prose = strip_code_blocks(doc);
    let value = |label: &str| -> Result<f64> {
        let caps = header_regex(label)
            .captures(&prose)
            .ok_or_else(|| Error::Parse(format!("missing header `{label}`")))?;
        caps[1]
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad value for `{label}`: {e}")))
    };
    ContributionBreakdown::new(
        value(HEADER_AI_A)?,
        value(HEADER_AI_B)?,
        value(HEADER_CONVERGENT)?,
        value(HEADER_ARBITRATION)?,
    )
}

/// Document lines outside fenced code blocks.
fn prose_lines(doc: &str) -> Vec<&str> {
    let mut in_fence = false;
    let mut out = Vec::new();
    for line in doc.lines() {
        let t = line.trim_start();
        if t.starts_with("```") || t.starts_with("~~~") {
            in_fence = !in_fence;
            continue;
        }
        if !in_fence {
            out.push(line);
        }
    }
    out
}

fn strip_code_blocks(doc: &str) -> String {
    prose_lines(doc).join("\n")
}

fn heading(line: &str) -> Option<(usize, &str)> {
    let t = line.trim_start();
    if line.len() - t.len() > 3 {
        return None;
    }
    let level = t.bytes().take_while(|b| *b == b'#').count();
    if level == 0 || level > 6 {
        return None;
    }
    let rest = &t[level..];
    if !rest.is_empty() && !rest.starts_with([' ', '\t']) {
        return None;
    }
    Some((level, rest.trim()))
}

fn fix_entry_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s{0,3}(?:#{1,6}\s*|[-*+]\s+|\d+[.)]\s+)?(?:\*\*|__)?\s*Fix\s*#\s*\d+")
            .expect("static regex")
    })
}

fn list_item_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([ \t]*)(?:[-*+]|\d+[.)])[ \t]+\S").expect("static regex"))
}

/// Lines of the first section whose heading contains `phrase`, up to the
/// next heading of the same or a higher level. Headings that are `Fix #N`
/// entries, or that open a section named in `stop_at` at any level, are
/// treated accordingly.
fn section<'a>(lines: &[&'a str], phrase: &str, stop_at: Option<&str>) -> Option<Vec<&'a str>> {
    let phrase = phrase.to_uppercase();
    let start = lines.iter().position(|l| {
        heading(l)
            .map(|(_, text)| text.to_uppercase().contains(&phrase))
            .unwrap_or(false)
    })?;
    let (level, _) = heading(lines[start]).expect("start is a heading");
    let mut out = Vec::new();
    for line in &lines[start + 1..] {
        if let Some((l, text)) = heading(line) {
            let upper = text.to_uppercase();
            let stops_here = stop_at.map(|s| upper.contains(s)).unwrap_or(false);
            if stops_here || (l <= level && !fix_entry_regex().is_match(line)) {
                break;
            }
        }
        out.push(*line);
    }
    Some(out)
}

fn indent_width(ws: &str) -> usize {
    ws.chars().map(|c| if c == '\t' { 4 } else { 1 }).sum()
}

/// Counts accepted (`Fix #N` entries) and rejected (top-level list items).
pub fn count_fixes(doc: &str) -> Result<FixTally> {
    let lines = prose_lines(doc);
    let accepted_lines = section(&lines, SECTION_ACCEPTED, Some(SECTION_REJECTED))
        .ok_or_else(|| Error::Parse(format!("missing `{SECTION_ACCEPTED}` section")))?;
    let accepted = accepted_lines
        .iter()
        .filter(|l| fix_entry_regex().is_match(l))
        .count() as u32;

    let rejected = match section(&lines, SECTION_REJECTED, None) {
        None => 0,
        Some(body) => {
            let indents: Vec<usize> = body
                .iter()
                .filter_map(|l| list_item_regex().captures(l))
                .map(|c| indent_width(&c[1]))
                .collect();
            match indents.iter().min() {
                Some(top) => indents.iter().filter(|i| *i == top).count() as u32,
                None => 0,
            }
        }
    };
    Ok(FixTally { accepted, rejected })
}

/// `accepted / total * 100`, rounded half-up to one decimal.
pub fn acceptance_rate(tally: FixTally) -> Result<f64> {
    if tally.total() == 0 {
        return Err(Error::UndefinedMetric(
            "acceptance rate with zero propositions".into(),
        ));
    }
    Ok(round_half_up(
        tally.accepted as f64 / tally.total() as f64 * 100.0,
        1,
    ))
}

/// `(arbitration >= 50, convergent >= 75)`.
pub fn compute_flags(b: &ContributionBreakdown) -> (bool, bool) {
    (
        b.arbitration_pct >= ARBITRATION_FLAG_PCT,
        b.convergent_pct >= CONVERGENCE_FLAG_PCT,
    )
}

/// Ties resolve in the order Convergent, AI_B, AI_A, Arbitration.
pub fn max_contributor(b: &ContributionBreakdown) -> Contributor {
    const PRECEDENCE: [Contributor; 4] = [
        Contributor::Convergent,
        Contributor::AiB,
        Contributor::AiA,
        Contributor::Arbitration,
    ];
    let mut best = PRECEDENCE[0];
    for c in &PRECEDENCE[1..] {
        if b.get(*c) > b.get(best) {
            best = *c;
        }
    }
    best
}

/// Propositions per accepted fix, two decimals.
pub fn efficiency(tally: FixTally) -> Result<f64> {
    if tally.accepted == 0 {
        return Err(Error::UndefinedMetric(
            "efficiency with zero accepted fixes".into(),
        ));
    }
    Ok(round_half_up(
        tally.total() as f64 / tally.accepted as f64,
        2,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group: Option<String>,
    pub breakdown: ContributionBreakdown,
    pub tally: FixTally,
    pub acceptance_rate_pct: f64,
    pub total_ai_pct: f64,
    pub max_contributor: Contributor,
    pub arbitration_flag: bool,
    pub convergence_flag: bool,
    pub propositions_per_accepted: Option<f64>,
}

impl RunMetrics {
    pub fn from_parts(
        run_id: impl Into<String>,
        breakdown: ContributionBreakdown,
        tally: FixTally,
    ) -> Result<Self> {
        let (arbitration_flag, convergence_flag) = compute_flags(&breakdown);
        Ok(Self {
            run_id: run_id.into(),
            group: None,
            acceptance_rate_pct: acceptance_rate(tally)?,
            total_ai_pct: breakdown.total_ai_pct(),
            max_contributor: max_contributor(&breakdown),
            arbitration_flag,
            convergence_flag,
            propositions_per_accepted: efficiency(tally).ok(),
            breakdown,
            tally,
        })
    }

    pub fn from_document(run_id: impl Into<String>, doc: &str) -> Result<Self> {
        let breakdown = parse_contributions(doc)?;
        let tally = count_fixes(doc)?;
        Self::from_parts(run_id, breakdown, tally)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    #[default]
    Wald,
    Wilson,
}

/// 95% interval for a proportion, as percentages clamped to [0, 100] and
/// rounded to one decimal.
pub fn confidence_interval_95(successes: u32, n: u32, method: CiMethod) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "confidence interval with zero propositions".into(),
        ));
    }
    let p = successes as f64 / n as f64;
    let nf = n as f64;
    let (lo, hi) = match method {
        CiMethod::Wald => {
            let half = Z_95 * (p * (1.0 - p) / nf).sqrt();
            (p - half, p + half)
        }
        CiMethod::Wilson => {
            let z2 = Z_95 * Z_95;
            let denom = 1.0 + z2 / nf;
            let centre = (p + z2 / (2.0 * nf)) / denom;
            let half = Z_95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
            (centre - half, centre + half)
        }
    };
    let pct = |x: f64| round_half_up((x * 100.0).clamp(0.0, 100.0), 1);
    Ok((pct(lo), pct(hi)))
}

/// Statistics for a set of runs (all runs, or one labelled group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub n_runs: usize,
    pub total_accepted: u32,
    pub total_rejected: u32,
    pub total_propositions: u32,
    /// Pooled `sum(accepted) / sum(total)`, one decimal.
    pub overall_acceptance_pct: f64,
    pub ci_95: (f64, f64),
    pub propositions_per_accepted: Option<f64>,
    pub mean_propositions: f64,
    /// Mean of the per-run (rounded) acceptance rates.
    pub mean_acceptance_pct: f64,
    pub mean_ai_a_pct: f64,
    pub mean_ai_b_pct: f64,
    pub mean_convergent_pct: f64,
    pub mean_arbitration_pct: f64,
    pub mean_total_ai_pct: f64,
    pub arbitration_flags: usize,
    pub convergence_flags: usize,
    pub max_contributors: BTreeMap<Contributor, usize>,
}

impl GroupMetrics {
    fn compute(runs: &[&RunMetrics], method: CiMethod) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::UndefinedMetric("aggregate over zero runs".into()));
        }
        let accepted: u32 = runs.iter().map(|r| r.tally.accepted).sum();
        let rejected: u32 = runs.iter().map(|r| r.tally.rejected).sum();
        let tally = FixTally::new(accepted, rejected);
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&RunMetrics) -> f64| runs.iter().map(|r| f(r)).sum::<f64>() / n;
        let mut max_contributors = BTreeMap::new();
        for r in runs {
            *max_contributors.entry(r.max_contributor).or_insert(0) += 1;
        }
        Ok(Self {
            n_runs: runs.len(),
            total_accepted: accepted,
            total_rejected: rejected,
            total_propositions: tally.total(),
            overall_acceptance_pct: acceptance_rate(tally)?,
            ci_95: confidence_interval_95(accepted, tally.total(), method)?,
            propositions_per_accepted: efficiency(tally).ok(),
            mean_propositions: mean(&|r| r.tally.total() as f64),
            mean_acceptance_pct: mean(&|r| r.acceptance_rate_pct),
            mean_ai_a_pct: mean(&|r| r.breakdown.ai_a_pct),
            mean_ai_b_pct: mean(&|r| r.breakdown.ai_b_pct),
            mean_convergent_pct: mean(&|r| r.breakdown.convergent_pct),
            mean_arbitration_pct: mean(&|r| r.breakdown.arbitration_pct),
            mean_total_ai_pct: mean(&|r| r.total_ai_pct),
            arbitration_flags: runs.iter().filter(|r| r.arbitration_flag).count(),
            convergence_flags: runs.iter().filter(|r| r.convergence_flag).count(),
            max_contributors,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub ci_method: CiMethod,
    pub overall: GroupMetrics,
    pub groups: BTreeMap<String, GroupMetrics>,
}

/// Pools `runs`; when `labels` maps run ids to group names, each group is
/// also summarised (runs without a label are left out of the splits).
pub fn aggregate(
    runs: &[RunMetrics],
    labels: Option<&BTreeMap<String, String>>,
    method: CiMethod,
) -> Result<AggregateMetrics> {
    let all: Vec<&RunMetrics> = runs.iter().collect();
    let overall = GroupMetrics::compute(&all, method)?;

    let mut grouped: BTreeMap<String, Vec<&RunMetrics>> = BTreeMap::new();
    for r in runs {
        let label = labels.and_then(|m| m.get(&r.run_id)).or(r.group.as_ref());
        if let Some(label) = label {
            grouped.entry(label.clone()).or_default().push(r);
        }
    }
    let groups = grouped
        .into_iter()
        .map(|(k, v)| GroupMetrics::compute(&v, method).map(|g| (k, g)))
        .collect::<Result<_>>()?;

    Ok(AggregateMetrics {
        ci_method: method,
        overall,
        groups,
    })
}

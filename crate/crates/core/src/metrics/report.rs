use serde::Serialize;

use super::{AggregateMetrics, GroupMetrics, RunMetrics};
use crate::error::{Error, Result};

/// Everything `metrics` prints: per-run rows, the aggregate, and documents
/// that could not be parsed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub runs: Vec<RunMetrics>,
    pub aggregate: AggregateMetrics,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<ParseFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseFailure {
    pub source: String,
    pub message: String,
}

pub fn to_json(report: &MetricsReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Run(format!("cannot serialize metrics: {e}")))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn opt2(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
}

fn summary(label: &str, g: &GroupMetrics, out: &mut String) {
    out.push_str(&format!(
        "{label}: runs={} accepted={} rejected={} total={} acceptance={:.1}% ci95=({:.1}, {:.1}) props/accepted={}\n",
        g.n_runs,
        g.total_accepted,
        g.total_rejected,
        g.total_propositions,
        g.overall_acceptance_pct,
        g.ci_95.0,
        g.ci_95.1,
        opt2(g.propositions_per_accepted),
    ));
    out.push_str(&format!(
        "{label} means: propositions={:.1} acceptance={:.1}% AI_A={:.1} AI_B={:.1} convergent={:.1} arbitration={:.1} total_ai={:.1} | flags: arbitration={} convergence={}\n",
        g.mean_propositions,
        g.mean_acceptance_pct,
        g.mean_ai_a_pct,
        g.mean_ai_b_pct,
        g.mean_convergent_pct,
        g.mean_arbitration_pct,
        g.mean_total_ai_pct,
        g.arbitration_flags,
        g.convergence_flags,
    ));
}

/// Aligned-column rendering of the per-run rows followed by the summaries.
pub fn render_table(report: &MetricsReport) -> String {
    let header = [
        "run",
        "group",
        "props",
        "acc",
        "rej",
        "rate%",
        "AI_A",
        "AI_B",
        "conv",
        "arb",
        "max",
        "arb_flag",
        "conv_flag",
    ];
    let rows: Vec<Vec<String>> = report
        .runs
        .iter()
        .map(|r| {
            vec![
                r.run_id.clone(),
                r.group.clone().unwrap_or_else(|| "-".into()),
                r.tally.total().to_string(),
                r.tally.accepted.to_string(),
                r.tally.rejected.to_string(),
                format!("{:.1}", r.acceptance_rate_pct),
                format!("{:.1}", r.breakdown.ai_a_pct),
                format!("{:.1}", r.breakdown.ai_b_pct),
                format!("{:.1}", r.breakdown.convergent_pct),
                format!("{:.1}", r.breakdown.arbitration_pct),
                r.max_contributor.to_string(),
                yes_no(r.arbitration_flag).into(),
                yes_no(r.convergence_flag).into(),
            ]
        })
        .collect();

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            // first two columns are text, the rest numeric
            if i < 2 {
                s.push_str(&format!("{cell:<w$}"));
            } else {
                s.push_str(&format!("{cell:>w$}"));
            }
        }
        s.trim_end().to_string() + "\n"
    };

    let mut out = line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for row in &rows {
        out.push_str(&line(row));
    }
    out.push('\n');
    summary("overall", &report.aggregate.overall, &mut out);
    for (name, g) in &report.aggregate.groups {
        summary(&format!("group {name}"), g, &mut out);
    }
    out
}

#[derive(Serialize)]
struct CsvRow<'a> {
    bug: &'a str,
    group: &'a str,
    propositions: u32,
    acceptance_rate_pct: f64,
    ai_a_pct: f64,
    ai_b_pct: f64,
    arbitrator_pct: f64,
    convergent_pct: f64,
    accepted: u32,
    rejected: u32,
    total_ai_pct: f64,
    max_contributor: String,
    arbitration_flag: bool,
    convergence_flag: bool,
}

/// One row per run, columns ordered like the published per-bug table.
pub fn to_csv(runs: &[RunMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in runs {
        w.serialize(CsvRow {
            bug: &r.run_id,
            group: r.group.as_deref().unwrap_or(""),
            propositions: r.tally.total(),
            acceptance_rate_pct: r.acceptance_rate_pct,
            ai_a_pct: r.breakdown.ai_a_pct,
            ai_b_pct: r.breakdown.ai_b_pct,
            arbitrator_pct: r.breakdown.arbitration_pct,
            convergent_pct: r.breakdown.convergent_pct,
            accepted: r.tally.accepted,
            rejected: r.tally.rejected,
            total_ai_pct: r.total_ai_pct,
            max_contributor: r.max_contributor.to_string(),
            arbitration_flag: r.arbitration_flag,
            convergence_flag: r.convergence_flag,
        })
        .map_err(|e| Error::Run(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Run(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Run(format!("csv: {e}")))
}

//! Aggregate metrics over the bundled per-bug fixture documents.
//!
//! `cargo run --example metrics_report -- [--wilson]`

use std::path::Path;

use crossfix::cli::{build_metrics_report, read_group_labels, resolve_documents};
use crossfix::metrics::{render_table, CiMethod};

fn main() -> crossfix::Result<()> {
    let method = if std::env::args().any(|a| a == "--wilson") {
        CiMethod::Wilson
    } else {
        CiMethod::Wald
    };
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bug_study");
    let docs = resolve_documents(&[dir.to_string_lossy().into_owned()])?;
    let labels = read_group_labels(&dir.join("groups.yaml"))?;
    let report = build_metrics_report(&docs, Some(&labels), method)?;
    print!("{}", render_table(&report));
    Ok(())
}

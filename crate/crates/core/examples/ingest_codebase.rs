//! Scan a directory into a corpus and print the file listing.
//!
//! `cargo run --example ingest_codebase -- [DIR]` (defaults to this crate's `src/`).

use std::path::PathBuf;

use crossfix::corpus::scan_codebase;
use crossfix::tokens::estimate_tokens;

fn main() -> crossfix::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src"));
    let corpus = scan_codebase(&root)?;
    print!("{}", corpus.listing());
    println!(
        "{} files, {} chars, ~{} tokens at 0.25 tokens/char",
        corpus.files.len(),
        corpus.total_chars,
        estimate_tokens(&corpus.assembled_text, 0.25)
    );
    Ok(())
}

//! Split a synthetic corpus for the two default context windows.

use crossfix::corpus::{Corpus, SourceFile};
use crossfix::tokens::{chunk_corpus, TokenBudget};

fn main() -> crossfix::Result<()> {
    let line = "total = sum(item.price * item.qty for item in cart.items)\n";
    let files: Vec<SourceFile> = (0..10)
        .map(|i| SourceFile::new(format!("app/module_{i:02}.py"), line.repeat(350 + 40 * i)))
        .collect();
    let corpus = Corpus::from_files("/demo", files);
    println!(
        "corpus: {} files, {} chars",
        corpus.files.len(),
        corpus.total_chars
    );

    for (name, limit) in [("16k window", 16_000), ("200k window", 200_000)] {
        let budget = TokenBudget::new(limit, 0.75)?;
        let chunks = chunk_corpus(&corpus, &budget, 0.25)?;
        println!(
            "{name}: effective {} tokens, {} chunk(s)",
            budget.effective_tokens,
            chunks.len()
        );
        for c in &chunks {
            println!(
                "  chunk {}: {} files, {} tokens{}",
                c.index,
                c.files.len(),
                c.estimated_tokens,
                if c.truncated { " (truncated)" } else { "" }
            );
        }
    }

    // a single file larger than the window is cut at a line boundary
    let huge = Corpus::from_files("/demo", vec![SourceFile::new("big.py", line.repeat(2_000))]);
    let chunks = chunk_corpus(&huge, &TokenBudget::new(16_000, 0.75)?, 0.25)?;
    let tail: Vec<&str> = chunks[0].text.lines().rev().take(2).collect();
    println!("oversized file ends with:\n  {}\n  {}", tail[1], tail[0]);
    Ok(())
}

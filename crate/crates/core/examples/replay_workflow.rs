//! Run all three phases offline with replay fixtures and list the results.

use std::fs;
use std::sync::Arc;

use crossfix::config::{load_config, EnvMap};
use crossfix::providers::{FakeClock, Transport, TransportError, WireRequest, WireResponse};
use crossfix::workflow::run_workflow;

struct NoNetwork;

impl Transport for NoNetwork {
    fn send(&self, _request: &WireRequest) -> Result<WireResponse, TransportError> {
        Err(TransportError("replay runs never touch the network".into()))
    }
}

const FIXES: &str = "## CONTRIBUTION ANALYSIS
**AI^A CONTRIBUTION:** 15%
**AI^B CONTRIBUTION:** 45%
**CONVERGENT (BOTH AGREED):** 30%
**FINAL ARBITRATION:** 10%

## DEFINITIVE FIX LIST
### Fix #1: return 0 for an empty cart

## REJECTED FIXES
1. Switch to Decimal arithmetic - no evidence of rounding error
2. Add request logging - out of scope
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    for sub in ["prompts", "codebase/shop", "fixtures"] {
        fs::create_dir_all(root.join(sub))?;
    }
    fs::write(
        root.join("prompts/p1.txt"),
        "Audit the codebase for the bug.",
    )?;
    fs::write(
        root.join("prompts/p2.txt"),
        "Compare your audit with your peer's.",
    )?;
    fs::write(root.join("prompts/p3.txt"), "Arbitrate the final fix list.")?;
    fs::write(
        root.join("bug.txt"),
        "ZeroDivisionError in total() for an empty cart.\n",
    )?;
    fs::write(
        root.join("codebase/shop/cart.py"),
        "def total(items):\n    return sum(i.price for i in items) / len(items)\n",
    )?;
    for (name, body) in [
        ("phase1_analyst_a.md", "Audit A: len(items) can be 0."),
        ("phase1_analyst_b.md", "Audit B: guard the empty cart."),
        (
            "phase2_analyst_a.md",
            "Consolidation A: agree with B's guard.",
        ),
        (
            "phase2_analyst_b.md",
            "Consolidation B: keep the guard, drop Decimal.",
        ),
        ("phase3_arbitrator.md", FIXES),
    ] {
        fs::write(root.join("fixtures").join(name), body)?;
    }
    fs::write(
        root.join("config.yaml"),
        "apis:
  primary: {kind: replay, base_url: fixtures, temperature: 0.1, max_tokens: 3000}
  secondary: {kind: replay, base_url: fixtures, temperature: 0.1, max_tokens: 4000}
workflow:
  analyst_a: primary
  analyst_b: secondary
  arbitrator: primary
  prompts: {phase1: prompts/p1.txt, phase2: prompts/p2.txt, phase3: prompts/p3.txt}
",
    )?;

    let config = load_config(&root.join("config.yaml"), &EnvMap::new())?;
    let manifest = run_workflow(
        &config,
        Arc::new(NoNetwork),
        Arc::new(FakeClock::new()),
        &root.join("bug.txt"),
        &root.join("codebase"),
    )?;
    println!(
        "{} ({} provider calls)",
        manifest.run_dir, manifest.provider_calls
    );
    for a in &manifest.artifacts {
        println!(
            "  {:<22} {:>4} bytes  sha256 {}",
            a.filename,
            a.bytes,
            &a.sha256[..16]
        );
    }
    for input in &manifest.copied_inputs {
        println!("  {input}");
    }
    Ok(())
}

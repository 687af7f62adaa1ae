//! Environment substitution and validation errors when loading a config.

use std::fs;

use crossfix::config::{load_config, EnvMap};

const CONFIG: &str = "apis:
  openai:
    kind: openai-chat
    base_url: https://api.openai.com/v1
    api_key: ${OPENAI_API_KEY}
    model: gpt-3.5-turbo
    temperature: 0.1
    max_tokens: 3000
workflow:
  analyst_a: openai
  analyst_b: openai
  arbitrator: openai
  prompts: {phase1: p.txt, phase2: p.txt, phase3: p.txt}
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("config.yaml");
    fs::write(dir.path().join("p.txt"), "Analyse the bug.")?;
    fs::write(&path, CONFIG)?;

    match load_config(&path, &EnvMap::new()) {
        Ok(_) => println!("unexpectedly loaded without a key"),
        Err(e) => println!("without env: {e}"),
    }

    let env: EnvMap = [("OPENAI_API_KEY".to_string(), "sk-demo".to_string())].into();
    let config = load_config(&path, &env)?;
    let p = config.analyst_a();
    println!(
        "loaded: {} ({}) model={} context={} ratio={}",
        p.id, p.kind, p.model, p.context_limit_tokens, p.chars_per_token_ratio
    );
    println!("snapshot:\n{}", config.to_snapshot_yaml()?);

    fs::write(&path, CONFIG.replace("    temperature: 0.1\n", ""))?;
    if let Err(e) = load_config(&path, &env) {
        println!("without temperature: {e}");
    }
    Ok(())
}

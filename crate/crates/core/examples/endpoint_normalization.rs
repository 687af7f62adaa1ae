//! Show how OpenAI-compatible base URLs are turned into the chat endpoint.

use crossfix::providers::normalize_openai_endpoint;

fn main() -> crossfix::Result<()> {
    for base in [
        "https://api.openai.com",
        "https://api.openai.com/",
        "https://api.openai.com/v1",
        "https://api.openai.com/v1/chat/completions",
        "https://gateway.example.com/proxy/openai/v1/",
        "http://localhost:8000/v1/v1",
    ] {
        println!("{base:<48} -> {}", normalize_openai_endpoint(base)?);
    }
    Ok(())
}

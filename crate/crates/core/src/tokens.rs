//! Character-ratio token estimates and budget-aware corpus chunking.

use crate::corpus::{header_line, Corpus, SourceFile};
use crate::error::{Error, Result};

/// `ceil(chars * ratio)`, with products within float noise of an integer
/// snapped to that integer.
pub fn estimate_tokens(text: &str, ratio: f64) -> u64 {
    estimate_chars(text.chars().count(), ratio)
}

pub fn estimate_chars(chars: usize, ratio: f64) -> u64 {
    debug_assert!(ratio > 0.0);
    let x = chars as f64 * ratio;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest as u64
    } else {
        x.ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenBudget {
    pub context_limit_tokens: u64,
    pub safety_margin: f64,
    pub effective_tokens: u64,
}

impl TokenBudget {
    pub fn new(context_limit_tokens: u64, safety_margin: f64) -> Result<Self> {
        if context_limit_tokens == 0 {
            return Err(Error::Budget("context limit must be positive".into()));
        }
        if !(safety_margin > 0.0 && safety_margin <= 1.0) {
            return Err(Error::Budget(format!(
                "safety margin must lie in (0, 1], got {safety_margin}"
            )));
        }
        let x = context_limit_tokens as f64 * safety_margin;
        let effective = if (x - x.round()).abs() <= 1e-9 * x.max(1.0) {
            x.round()
        } else {
            x.floor()
        } as u64;
        if effective == 0 {
            return Err(Error::Budget(format!(
                "effective budget of {context_limit_tokens} x {safety_margin} rounds to zero tokens"
            )));
        }
        Ok(Self {
            context_limit_tokens,
            safety_margin,
            effective_tokens: effective.min(context_limit_tokens),
        })
    }

    /// Budget left for the corpus once `reserved` tokens of prompt
    /// scaffolding are set aside.
    pub fn reserve(&self, reserved: u64) -> Result<Self> {
        if reserved >= self.effective_tokens {
            return Err(Error::Budget(format!(
                "prompt scaffolding needs {reserved} tokens, leaving nothing of the {} effective tokens",
                self.effective_tokens
            )));
        }
        Ok(Self {
            effective_tokens: self.effective_tokens - reserved,
            ..*self
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusChunk {
    /// 1-based.
    pub index: usize,
    /// Relative paths of the files in this chunk, in corpus order.
    pub files: Vec<String>,
    pub text: String,
    pub estimated_tokens: u64,
    pub truncated: bool,
}

/// Line emitted where an oversized file is cut.
pub fn elision_marker(rel_path: &str) -> String {
    format!("# ===== TRUNCATED: {rel_path} (remaining content elided) =====\n")
}

/// Greedy first-fit packing of whole files into chunks.
///
/// A file that cannot fit even in an empty chunk is cut at the last line
/// boundary that keeps header, kept lines and elision marker within budget,
/// and occupies a chunk of its own.
pub fn chunk_corpus(corpus: &Corpus, budget: &TokenBudget, ratio: f64) -> Result<Vec<CorpusChunk>> {
    if corpus.files.is_empty() {
        return Err(Error::Input("cannot chunk an empty corpus".into()));
    }
    let limit = budget.effective_tokens;
    let mut chunks: Vec<CorpusChunk> = Vec::new();
    let mut text = String::new();
    let mut chars = 0usize;
    let mut files: Vec<String> = Vec::new();

    fn flush(
        chunks: &mut Vec<CorpusChunk>,
        text: &mut String,
        chars: &mut usize,
        files: &mut Vec<String>,
        ratio: f64,
        truncated: bool,
    ) {
        if files.is_empty() {
            return;
        }
        chunks.push(CorpusChunk {
            index: chunks.len() + 1,
            files: std::mem::take(files),
            estimated_tokens: estimate_chars(*chars, ratio),
            text: std::mem::take(text),
            truncated,
        });
        *chars = 0;
    }

    for file in &corpus.files {
        let segment = file.assembled();
        let seg_chars = segment.chars().count();
        if estimate_chars(chars + seg_chars, ratio) <= limit {
            text.push_str(&segment);
            chars += seg_chars;
            files.push(file.rel_path.clone());
            continue;
        }
        flush(&mut chunks, &mut text, &mut chars, &mut files, ratio, false);
        if estimate_chars(seg_chars, ratio) <= limit {
            text = segment;
            chars = seg_chars;
            files.push(file.rel_path.clone());
            continue;
        }
        let cut = truncate_file(file, limit, ratio)?;
        chars = cut.chars().count();
        text = cut;
        files.push(file.rel_path.clone());
        flush(&mut chunks, &mut text, &mut chars, &mut files, ratio, true);
    }
    flush(&mut chunks, &mut text, &mut chars, &mut files, ratio, false);
    Ok(chunks)
}

fn truncate_file(file: &SourceFile, limit: u64, ratio: f64) -> Result<String> {
    let header = header_line(&file.rel_path);
    let marker = elision_marker(&file.rel_path);
    let fixed = header.chars().count() + marker.chars().count();

    let mut kept = 0usize; // byte offset of the kept prefix
    let mut kept_chars = 0usize;
    for line in file.content.split_inclusive('\n') {
        let line_chars = line.chars().count();
        // a kept line always ends in a newline so the marker starts its own line
        let extra = usize::from(!line.ends_with('\n'));
        if estimate_chars(fixed + kept_chars + line_chars + extra, ratio) > limit {
            break;
        }
        kept += line.len();
        kept_chars += line_chars;
    }
    if kept == 0 {
        return Err(Error::Budget(format!(
            "effective budget of {limit} tokens cannot hold the header, one line and the elision marker of {}",
            file.rel_path
        )));
    }
    let mut out = header;
    out.push_str(&file.content[..kept]);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&marker);
    Ok(out)
}

//! Codebase ingestion.
//!
//! A directory is walked recursively (symlinks are not followed), filtered
//! by extension, sorted byte-wise by relative path and assembled into one
//! text where every file is introduced by a `# ===== <path> =====` line.

use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::error::{Error, Result};

/// Accepted file suffixes, compared case-insensitively.
pub const SUPPORTED_EXTENSIONS: &[&str] = &[
    "py", "js", "java", "cpp", "c", "h", "cs", "php", "rb", "go", "rs", "ts", "jsx", "tsx", "vue",
    "swift", "kt", "scala", "r", "sql", "html", "css", "json", "xml", "yaml", "yml", "md", "txt",
];

/// Directory names skipped wherever they appear below the root.
pub const DEFAULT_EXCLUDED_DIRS: &[&str] = &[
    ".git",
    "__pycache__",
    "node_modules",
    "build",
    "dist",
    "target",
    ".venv",
    "venv",
    ".idea",
    ".vscode",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    /// Relative to the corpus root, always with `/` separators.
    pub rel_path: String,
    pub content: String,
    pub char_count: usize,
    pub lossy_decoded: bool,
}

impl SourceFile {
    pub fn new(rel_path: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        Self {
            rel_path: rel_path.into(),
            char_count: content.chars().count(),
            content,
            lossy_decoded: false,
        }
    }

    /// Header line plus content plus trailing newline, as it appears in the
    /// assembled corpus.
    pub fn assembled(&self) -> String {
        let mut s = header_line(&self.rel_path);
        s.push_str(&self.content);
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
    pub assembled_text: String,
    pub total_chars: usize,
}

impl Corpus {
    /// Builds a corpus from already-loaded files, sorting them by path.
    pub fn from_files(root: impl Into<PathBuf>, mut files: Vec<SourceFile>) -> Self {
        files.sort_by(|a, b| a.rel_path.as_bytes().cmp(b.rel_path.as_bytes()));
        let assembled_text: String = files.iter().map(SourceFile::assembled).collect();
        Self {
            root: root.into(),
            total_chars: assembled_text.chars().count(),
            files,
            assembled_text,
        }
    }

    /// One line per file: `<rel_path>\t<chars>`.
    pub fn listing(&self) -> String {
        self.files
            .iter()
            .map(|f| {
                let lossy = if f.lossy_decoded { "\tlossy" } else { "" };
                format!("{}\t{}{}\n", f.rel_path, f.char_count, lossy)
            })
            .collect()
    }
}

/// `# ===== <rel_path> =====` followed by a newline.
pub fn header_line(rel_path: &str) -> String {
    format!("# ===== {rel_path} =====\n")
}

/// Returns the path if `line` (without its newline) is a file header.
pub fn parse_header(line: &str) -> Option<&str> {
    line.strip_prefix("# ===== ")?.strip_suffix(" =====")
}

/// Splits assembled text back into `(rel_path, content)` pairs.
///
/// Only exact for files whose content has no line that looks like a header.
pub fn split_assembled(text: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, String)> = None;
    for line in text.split_inclusive('\n') {
        let bare = line.strip_suffix('\n').unwrap_or(line);
        if let Some(path) = parse_header(bare) {
            if let Some(done) = current.take() {
                out.push(done);
            }
            current = Some((path.to_string(), String::new()));
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
        }
    }
    out.extend(current);
    for (_, body) in &mut out {
        // drop the separator newline appended after each file
        if body.ends_with('\n') {
            body.pop();
        }
    }
    out
}

/// Decodes bytes as UTF-8, replacing invalid sequences with U+FFFD.
pub fn decode_file(bytes: &[u8]) -> (String, bool) {
    match String::from_utf8_lossy(bytes) {
        Cow::Borrowed(s) => (s.to_string(), false),
        Cow::Owned(s) => (s, true),
    }
}

pub fn is_supported(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|ext| {
            SUPPORTED_EXTENSIONS
                .iter()
                .any(|s| s.eq_ignore_ascii_case(ext))
        })
        .unwrap_or(false)
}

pub fn scan_codebase(root: &Path) -> Result<Corpus> {
    scan_codebase_excluding(root, DEFAULT_EXCLUDED_DIRS)
}

pub fn scan_codebase_excluding<S: AsRef<str>>(root: &Path, excluded: &[S]) -> Result<Corpus> {
    if !root.is_dir() {
        return Err(Error::Input(format!(
            "codebase root {} does not exist or is not a directory",
            root.display()
        )));
    }

    let walker = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0
                || !e.file_type().is_dir()
                || !excluded
                    .iter()
                    .any(|x| e.file_name().to_str() == Some(x.as_ref()))
        });

    let mut files = Vec::new();
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e
                .path()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| root.to_path_buf());
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() || !is_supported(entry.path()) {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root");
        let rel_path = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let bytes = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        let (content, lossy_decoded) = decode_file(&bytes);
        files.push(SourceFile {
            rel_path,
            char_count: content.chars().count(),
            content,
            lossy_decoded,
        });
    }

    if files.is_empty() {
        return Err(Error::Input(format!(
            "no supported source files found under {}",
            root.display()
        )));
    }
    Ok(Corpus::from_files(root, files))
}

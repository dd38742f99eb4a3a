//! Line-delimited JSON helpers and atomic file writes.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// A problem on one input line, reported with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiagnostic {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Stream typed records from a line-delimited reader. Blank lines are
/// skipped; malformed lines yield located diagnostics instead of stopping
/// the stream. I/O errors also surface as diagnostics on their line.
pub fn read_lines<T: DeserializeOwned>(
    reader: impl BufRead,
) -> impl Iterator<Item = Result<(u64, T), LineDiagnostic>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| {
            let line_no = idx as u64 + 1;
            match line {
                Err(e) => Some(Err(LineDiagnostic {
                    line: line_no,
                    message: e.to_string(),
                })),
                Ok(text) if text.trim().is_empty() => None,
                Ok(text) => Some(match serde_json::from_str::<T>(&text) {
                    Ok(value) => Ok((line_no, value)),
                    Err(e) => Err(LineDiagnostic {
                        line: line_no,
                        message: e.to_string(),
                    }),
                }),
            }
        })
}

/// Serialize records one per line.
pub fn write_lines<'a, T: Serialize + 'a>(
    writer: &mut impl Write,
    items: impl IntoIterator<Item = &'a T>,
) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *writer, item)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Write a file atomically: write to a sibling temp file, then rename over
/// the destination.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> std::io::Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp = path.to_path_buf();
    tmp.set_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

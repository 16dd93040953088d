//! File output: atomic writes and fixed float formatting.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

/// Shortest representation that parses back to the same `f64` (at most 17
/// significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a file in {}", dir.display()))?;
    tmp.write_all(contents)
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// A CSV table of plain fields (no quoting needed).
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(header: I) -> Self {
        let mut csv = Self { buf: String::new() };
        csv.row(header);
        csv
    }

    pub fn row<I: IntoIterator<Item = S>, S: AsRef<str>>(&mut self, fields: I) {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            let _ = write!(self.buf, "{}", f.as_ref());
        }
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

//! All-or-nothing output staging and CSV helpers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Files are written into a hidden sibling directory and moved into the
/// output directory only on `commit`. Dropping an uncommitted stage removes it.
pub struct Stage {
    dir: PathBuf,
    out: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Stage {
    pub fn new(out: &Path) -> Result<Self, CliError> {
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| CliError::io(format!("cannot create {}: {e}", parent.display())))?;
        let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(format!("cannot clear {}: {e}", dir.display())))?;
        }
        fs::create_dir(&dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            out: out.to_path_buf(),
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))?;
        f.write_all(bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(format!("cannot serialize {name}: {e}")))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn commit(mut self) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(format!("cannot create {}: {e}", self.out.display())))?;
        let mut written = Vec::new();
        for f in &self.files {
            let dest = self.out.join(f);
            fs::rename(self.dir.join(f), &dest).map_err(|e| CliError::io(format!("cannot move {}: {e}", dest.display())))?;
            written.push(dest);
        }
        self.committed = true;
        let _ = fs::remove_dir_all(&self.dir);
        Ok(written)
    }
}

impl Drop for Stage {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Header-first CSV text with LF line endings.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

/// Quotes a text field when it contains a separator, quote or line break.
pub fn text(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

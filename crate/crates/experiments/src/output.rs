//! Deterministic CSV/JSON emission.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{RunError, RunResult};

/// Nine significant digits, scientific notation, `.` decimal separator.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // normalizes −0 to 0
    format!("{:.8e}", x + 0.0)
}

/// Builds CSV text with `\n` line endings.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn with_header(header: &str) -> Self {
        let mut text = String::with_capacity(4096);
        text.push_str(header);
        text.push('\n');
        Self { text }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(f.as_ref());
            first = false;
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

pub fn ensure_dir(dir: &Path) -> RunResult<()> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> RunResult<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> RunResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(dir, name, &text)
}

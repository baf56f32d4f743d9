//! JSON-lines persistence for training statistics: one record per line, so
//! curves stream to disk as training runs and partial files stay readable
//! after an interrupted run.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        // to_writer never emits newlines for non-pretty output.
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    Ok(std::fs::write(path, out)?)
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let file = std::fs::File::open(&path)?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| {
            Error::format(path.as_ref().display().to_string(), format!("line {}: {e}", i + 1))
        })?);
    }
    Ok(items)
}

/// Incremental writer used by the training operations, so stats land on disk
/// as each iteration finishes.
pub struct JsonlWriter {
    file: std::fs::File,
}

impl JsonlWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(JsonlWriter { file: std::fs::File::create(path)? })
    }

    pub fn push<T: Serialize>(&mut self, item: &T) -> Result<()> {
        let mut line = serde_json::to_vec(item)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        Ok(())
    }
}

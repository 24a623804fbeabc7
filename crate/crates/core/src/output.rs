//! Atomic artifact writes with a provenance header.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::NamedTempFile;

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `znlgt <version> config=<hash>`.
pub fn provenance(config_hash: &str) -> String {
    format!("znlgt {VERSION} config={config_hash}")
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Destination directory plus the provenance of the current run.
#[derive(Clone, Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    provenance: String,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>, config_hash: &str) -> Self {
        ArtifactWriter {
            dir: dir.into(),
            provenance: provenance(config_hash),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Text file whose first line is `# <provenance>`.
    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut s = format!("# {}\n", self.provenance);
        s.push_str(body);
        write_atomic(&path, s.as_bytes())?;
        Ok(path)
    }

    /// JSON object with a leading `provenance` member. JSON has no comment
    /// syntax, so the header lives inside the document.
    pub fn json(&self, name: &str, body: Value) -> Result<PathBuf> {
        let mut map = serde_json::Map::new();
        map.insert("provenance".into(), Value::String(self.provenance.clone()));
        match body {
            Value::Object(o) => map.extend(o),
            other => {
                map.insert("data".into(), other);
            }
        }
        let mut s =
            serde_json::to_string_pretty(&Value::Object(map)).expect("JSON values serialize");
        s.push('\n');
        let path = self.dir.join(name);
        write_atomic(&path, s.as_bytes())?;
        Ok(path)
    }
}

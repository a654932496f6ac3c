//! Atomic file output and shared metadata.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ergodic::Calibration;

pub const TOOL: &str = "idp-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header carried by every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub calibration: Calibration,
}

impl Provenance {
    pub fn new(command: &'static str, seed: u64, calibration: Calibration) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            seed,
            calibration,
        }
    }
}

/// Writes to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Declarative plot description: which file, which columns, which axes.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub data: String,
    pub x: String,
    pub y: Vec<String>,
    pub error: Vec<String>,
    pub kind: &'static str,
}

impl PlotSpec {
    pub fn render(&self) -> String {
        let mut s = format!(
            "title: {}\ndata: {}\nkind: {}\nx: {}\n",
            self.title, self.data, self.kind, self.x
        );
        s.push_str(&format!("y: {}\n", self.y.join(", ")));
        if !self.error.is_empty() {
            s.push_str(&format!("error: {}\n", self.error.join(", ")));
        }
        s
    }
}

/// Collects the paths written by one command.
#[derive(Debug, Default)]
pub struct Written(pub Vec<PathBuf>);

impl Written {
    pub fn text(&mut self, path: PathBuf, text: &str) -> std::io::Result<()> {
        write_atomic(&path, text.as_bytes())?;
        self.0.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> std::io::Result<()> {
        write_json(&path, value)?;
        self.0.push(path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("a.txt");
        write_atomic(&path, b"hello").unwrap();
        write_atomic(&path, b"world").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "world");
        let names: Vec<_> = std::fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }
}

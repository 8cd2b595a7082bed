use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Vec<(String, String)>,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
}

/// Collects the files of one run under a common output directory.
pub struct Outputs {
    dir: PathBuf,
    hash: String,
    manifest: RunManifest,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, hash: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
            manifest: RunManifest {
                command: command.to_string(),
                parameters: Vec::new(),
                config_hash: hash.to_string(),
                seed,
                version: VERSION.to_string(),
                outputs: Vec::new(),
            },
        })
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.manifest.parameters.push((key.to_string(), value.to_string()));
    }

    fn provenance(&self) -> String {
        format!("# config_hash={} version={}\n", self.hash, VERSION)
    }

    /// Writes `body` with the provenance line first.
    pub fn write(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        self.write_raw(name, &format!("{}{}", self.provenance(), body))
    }

    /// Writes a file whose first line is a format header that must stay
    /// first; the provenance line follows it.
    pub fn write_after_header(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let (first, rest) = body.split_once('\n').unwrap_or((body, ""));
        self.write_raw(name, &format!("{first}\n{}{rest}", self.provenance()))
    }

    fn write_raw(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self) -> Result<()> {
        let text = toml::to_string(&self.manifest)?;
        let path = self.dir.join("manifest.toml");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// CSV body with a `# columns:` line and fixed-precision rows.
pub fn csv(comments: &[String], columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(&format!("# columns: {}\n", columns.join(", ")));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.9e}")).collect();
        out.push_str(&cells.join(", "));
        out.push('\n');
    }
    out
}

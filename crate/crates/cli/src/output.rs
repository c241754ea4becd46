use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Serialize)]
struct Entry {
    file: String,
    bytes: usize,
}

/// Collects the files written by one command and finishes with a manifest.
pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<Entry>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.entries.push(Entry {
            file: name.to_string(),
            bytes: bytes.len(),
        });
        Ok(())
    }

    /// JSON document with the resolved configuration under `config`.
    pub fn json<T: Serialize>(&mut self, name: &str, config: &RunConfig, body: &T) -> Result<(), CliError> {
        let mut doc = serde_json::to_value(body).map_err(|e| CliError::Validation(e.to_string()))?;
        if let serde_json::Value::Object(map) = &mut doc {
            map.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("json value serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// CSV preceded by `#` comment lines holding the resolved configuration.
    pub fn csv(&mut self, name: &str, config: &RunConfig, body: &[u8]) -> Result<(), CliError> {
        let mut out = Vec::with_capacity(body.len() + 512);
        out.extend_from_slice(b"# config: ");
        out.extend_from_slice(serde_json::to_string(config).expect("config serializes").as_bytes());
        out.push(b'\n');
        out.extend_from_slice(body);
        self.write(name, &out)
    }

    pub fn finish(mut self, config: &RunConfig) -> Result<(), CliError> {
        let manifest = serde_json::json!({
            "tool": "mft-ssep",
            "version": env!("CARGO_PKG_VERSION"),
            "command": config.command,
            "config": config,
            "artifacts": self.entries,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        self.entries.clear();
        Ok(())
    }
}

/// Writes `diagnostic.json` for a failed run, best effort.
pub fn write_diagnostic(dir: &Path, config: &RunConfig, message: &str, detail: &serde_json::Value) {
    let doc = serde_json::json!({
        "command": config.command,
        "error": message,
        "detail": detail,
        "config": config,
    });
    if std::fs::create_dir_all(dir).is_ok() {
        let text = serde_json::to_string_pretty(&doc).expect("diagnostic serializes");
        let _ = std::fs::write(dir.join("diagnostic.json"), text + "\n");
    }
}

//! Run manifest: what was run, on which bytes, producing which bytes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{write_report, Report, ReportFormat};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub command_line: Vec<String>,
    pub tool_version: String,
    pub inputs: Vec<FileDigest>,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digest(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

/// Every regular file below `dir`, sorted.
pub fn files_below(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Output directory of one command run. Records every file it writes so
/// the manifest can list them with their digests.
#[derive(Debug)]
pub struct RunContext {
    pub out: PathBuf,
    pub format: ReportFormat,
    pub seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl RunContext {
    pub fn new(out: &Path, format: ReportFormat) -> Result<Self> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok(RunContext {
            out: out.to_path_buf(),
            format,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    pub fn output(&mut self, path: &Path) {
        if !self.outputs.iter().any(|p| p == path) {
            self.outputs.push(path.to_path_buf());
        }
    }

    /// Write a report as `<name>.json`, or in tabular form as `<name>.csv`
    /// (the table) plus `<name>_summary.csv` (the summary fields).
    pub fn report(&mut self, name: &str, report: &Report) -> Result<()> {
        if let (ReportFormat::Tabular, Some(_)) = (self.format, &report.table) {
            let summary = Report {
                summary: report.summary.clone(),
                table: None,
            };
            let p = self.out.join(format!("{name}_summary.csv"));
            write_report(&summary, &p, ReportFormat::Tabular)?;
            self.output(&p);
        }
        let p = self.out.join(format!("{name}.{}", self.format.extension()));
        write_report(report, &p, self.format)?;
        self.output(&p);
        Ok(())
    }

    pub fn text(&mut self, file: &str, content: &str) -> Result<()> {
        let p = self.out.join(file);
        std::fs::write(&p, content).map_err(|e| Error::io(&p, e))?;
        self.output(&p);
        Ok(())
    }

    /// Write `manifest.json` next to the outputs.
    pub fn finish(self, command_line: &[String]) -> Result<ReportManifest> {
        let manifest = ReportManifest {
            command_line: command_line.to_vec(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            seed: self.seed,
            timestamp: timestamp(),
            outputs: self.outputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
        };
        let p = self.out.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(manifest)
    }
}

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    /// Seconds.
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<PathBuf>,
    /// Schema tags of the CSV outputs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub schemas: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], config: &impl Serialize, seeds: Vec<u64>) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            argv: argv.to_vec(),
            config: serde_json::to_value(config)?,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            timings: BTreeMap::new(),
            outputs: Vec::new(),
            schemas: BTreeMap::new(),
        })
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = OsString::from(output.as_os_str());
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    /// Writes `<output>.manifest.json` if the run has a primary output file.
    pub fn finish(&self, output: Option<&Path>) -> Result<()> {
        let Some(out) = output else { return Ok(()) };
        for path in &self.outputs {
            anyhow::ensure!(path.exists(), "output {} was not written", path.display());
        }
        write_json(Some(&Self::path_for(out)), self)
    }
}

/// Pretty JSON to `path`, or stdout.
pub fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// CSV writer on `path`, or stdout.
pub fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

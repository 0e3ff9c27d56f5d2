//! Self-describing outputs: every JSON report and CSV file carries the tool
//! versions, the constants hash and the merged run configuration.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use foliage::constants::constants_hash;
use foliage::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const TOOL: &str = "foliage";

#[derive(Debug, Serialize)]
pub struct Runtime {
    pub workers: usize,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub tool: &'static str,
    pub cli_version: &'static str,
    pub library_version: &'static str,
    pub constants_hash: String,
    pub command: &'a str,
    pub config: &'a RunConfig,
    /// Timing and pool size; the only fields allowed to differ between
    /// repeated runs of the same configuration.
    pub runtime: Runtime,
    pub result: T,
}

/// Everything an artifact needs besides its payload.
pub struct Context {
    pub command: String,
    pub config: RunConfig,
    pub workers: usize,
    pub started: Instant,
}

impl Context {
    pub fn artifact<T: Serialize>(&self, result: T) -> Artifact<'_, T> {
        Artifact {
            tool: TOOL,
            cli_version: env!("CARGO_PKG_VERSION"),
            library_version: foliage::VERSION,
            constants_hash: constants_hash(),
            command: &self.command,
            config: &self.config,
            runtime: Runtime { workers: self.workers, elapsed_seconds: self.started.elapsed().as_secs_f64() },
            result,
        }
    }

    /// Writes the JSON report to `path`, or to stdout.
    pub fn emit<T: Serialize>(&self, result: T, path: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.artifact(result)).map_err(|e| Error::Parse(e.to_string()))?;
        match path {
            Some(p) => std::fs::write(p, text + "\n")?,
            None => {
                let mut out = std::io::stdout().lock();
                writeln!(out, "{text}")?;
            }
        }
        Ok(())
    }

    /// Comment lines prefixed to CSV artifacts. Free of timing, so equal
    /// configurations give byte-identical files.
    pub fn csv_header(&self) -> Result<String> {
        let cfg = serde_json::to_string(&self.config).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(format!(
            "# {TOOL} cli {} library {}\n# command={}\n# constants_hash={}\n# config={cfg}\n",
            env!("CARGO_PKG_VERSION"),
            foliage::VERSION,
            self.command,
            constants_hash()
        ))
    }

    pub fn write_csv(&self, path: &Path, body: &[u8]) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.csv_header()?.as_bytes())?;
        f.write_all(body)?;
        f.flush()?;
        Ok(())
    }
}

//! Output files and the run manifest that accompanies them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::{CliError, CliResult};

/// Bumped whenever a CSV column is added, removed or renamed.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Parameters {
    pub entry: Option<usize>,
    pub path: Option<Vec<usize>>,
    pub epsilon: Option<f64>,
    pub cap: Option<usize>,
    pub grid: Option<String>,
    pub tags: Option<usize>,
    pub seed: Option<u64>,
    pub compare_independent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub network: String,
    pub parameters: Parameters,
    pub csv_schema_version: u32,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

impl RunManifest {
    pub fn start(command: &'static str, network: &Path) -> Self {
        Self {
            tool: "jsojourn",
            version: env!("CARGO_PKG_VERSION"),
            command,
            network: network.display().to_string(),
            parameters: Parameters::default(),
            csv_schema_version: CSV_SCHEMA_VERSION,
            outputs: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0.0,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn csv<R: Serialize>(&self, manifest: &mut RunManifest, name: &str, rows: &[R]) -> CliResult<()> {
        let path = self.root.join(name);
        let io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io {
                path: path.clone(),
                source,
            },
            other => CliError::Internal(format!("{other:?}")),
        };
        let mut writer = csv::Writer::from_path(&path).map_err(io)?;
        for row in rows {
            writer.serialize(row).map_err(io)?;
        }
        writer.flush().map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        manifest.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes `summary.json` (the payload with the manifest embedded) and a
    /// standalone `manifest.json`.
    pub fn summary<S: Serialize>(&self, mut manifest: RunManifest, payload: &S) -> CliResult<()> {
        manifest.outputs.push("summary.json".into());
        manifest.outputs.push("manifest.json".into());
        manifest.finish();
        #[derive(Serialize)]
        struct Summary<'a, S> {
            manifest: &'a RunManifest,
            #[serde(flatten)]
            payload: &'a S,
        }
        self.json("summary.json", &Summary {
            manifest: &manifest,
            payload,
        })?;
        self.json("manifest.json", &manifest)
    }

    fn json<S: Serialize>(&self, name: &str, value: &S) -> CliResult<()> {
        let path = self.root.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|source| CliError::Io { path, source })
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::failure::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl FileRecord {
    fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
        Ok(Self::of(path, &bytes))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub threshrecon: &'static str,
    pub cli: &'static str,
    pub rng: &'static str,
    pub case_table_hash: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            threshrecon: threshrecon::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
            rng: threshrecon::cloud::RNG_ALGORITHM,
            case_table_hash: format!("{:016x}", threshrecon::extract::case_table_hash()),
        }
    }
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Value,
    pub inputs: Vec<FileRecord>,
    pub seed: Option<u64>,
    pub versions: Versions,
    /// Seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<FileRecord>,
    pub warnings: Vec<String>,
    pub results: Value,
    pub exit_code: u8,
}

impl RunManifest {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config,
            inputs: Vec::new(),
            seed: None,
            versions: Versions::default(),
            timings: BTreeMap::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            results: Value::Null,
            exit_code: 0,
        }
    }

    pub fn timing(&mut self, phase: &str, d: Duration) {
        self.timings.insert(phase.to_string(), d.as_secs_f64());
    }
}

/// Output directory that records every file it writes.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf, Failure> {
        let path = self.path(name);
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| Failure::io(&path, e))?;
        fs::write(&path, &buf).map_err(|e| Failure::io(&path, e))?;
        self.files.push(FileRecord::of(&path, &buf));
        Ok(path)
    }

    /// Adds a file written elsewhere (e.g. a nested run) to the listing.
    pub fn adopt(&mut self, records: impl IntoIterator<Item = FileRecord>) {
        self.files.extend(records);
    }

    /// Writes `manifest.json` after everything else and returns the full listing.
    pub fn finish(self, mut manifest: RunManifest) -> Result<Vec<FileRecord>, Failure> {
        let path = self.path("manifest.json");
        manifest.outputs = self.files.clone();
        let mut text =
            serde_json::to_vec_pretty(&manifest).map_err(|e| Failure::Internal(e.to_string()))?;
        text.push(b'\n');
        let mut f = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
        f.write_all(&text).map_err(|e| Failure::io(&path, e))?;
        let mut all = self.files;
        all.push(FileRecord::of(&path, &text));
        Ok(all)
    }
}

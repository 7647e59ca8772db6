//! Append-only record of generated graphs. One JSON object per line; each entry
//! carries the SHA-256 of the graph file it names so tampering is detected.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use expforge_core::graph::{deserialize, GameGraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub method: String,
    pub seed: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
pub struct Manifest {
    pub path: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Read and verify. A missing file is an empty manifest.
    pub fn load(path: &Path) -> Result<Manifest, String> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(format!("reading {}: {e}", path.display())),
        };
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let e: ManifestEntry =
                serde_json::from_str(line).map_err(|err| format!("{} line {}: {err}", path.display(), i + 1))?;
            entries.push(e);
        }
        let m = Manifest {
            path: path.to_path_buf(),
            entries,
        };
        for e in &m.entries {
            let bytes = std::fs::read(m.resolve(e)).map_err(|err| format!("manifest entry `{}`: {err}", e.id))?;
            let got = sha256_hex(&bytes);
            if got != e.sha256 {
                return Err(format!("manifest entry `{}` hash mismatch: recorded {}, file has {got}", e.id, e.sha256));
            }
        }
        Ok(m)
    }

    pub fn dir(&self) -> PathBuf {
        self.path.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    pub fn resolve(&self, e: &ManifestEntry) -> PathBuf {
        self.dir().join(&e.path)
    }

    pub fn graphs(&self) -> Result<Vec<GameGraph>, String> {
        self.entries
            .iter()
            .map(|e| {
                let bytes = std::fs::read(self.resolve(e)).map_err(|err| format!("manifest entry `{}`: {err}", e.id))?;
                deserialize(&bytes).map_err(|err| format!("manifest entry `{}`: {err}", e.id))
            })
            .collect()
    }

    pub fn append(&mut self, e: ManifestEntry) -> Result<(), String> {
        let line = serde_json::to_string(&e).expect("entry serializes") + "\n";
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|err| format!("opening {}: {err}", self.path.display()))?;
        f.write_all(line.as_bytes())
            .map_err(|err| format!("writing {}: {err}", self.path.display()))?;
        self.entries.push(e);
        Ok(())
    }
}

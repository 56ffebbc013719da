use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the directory holding the manifest.
    pub path: String,
    pub count: usize,
}

/// JSON index of a point-cloud set stored as one or more files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetManifest {
    pub name: String,
    pub part_names: Vec<String>,
    pub files: Vec<ManifestEntry>,
    pub version: u32,
}

impl SetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let manifest: SetManifest = serde_json::from_str(&text)
            .map_err(|e| CoreError::Manifest(format!("{}: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(CoreError::Manifest(format!(
                "{}: unsupported manifest version {}",
                path.display(),
                manifest.version
            )));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CoreError::io(path, e))
    }
}

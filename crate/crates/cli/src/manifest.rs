//! The per-dataset manifest written by `preprocess` and consumed by the
//! other commands: one entry per case, recording where the crop sits inside
//! the original grid and which files hold each modality.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dimshrink_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_NAME: &str = "manifest.json";

/// One preprocessed case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub id: String,
    /// Dimensions of the grid the case was cropped from.
    pub original_dims: [usize; 3],
    /// Position of the cropped block inside the original grid.
    pub crop_offset: [usize; 3],
    /// Modality suffix → file name, relative to the dataset directory.
    pub volumes: BTreeMap<String, String>,
    /// Ground-truth segmentation file, when present.
    pub seg: Option<String>,
}

impl CaseEntry {
    /// Absolute path of one modality volume, if the case has it.
    pub fn volume_path(&self, dir: &Path, modality: &str) -> Option<PathBuf> {
        self.volumes.get(modality).map(|f| dir.join(f))
    }
}

/// Index of a preprocessed dataset directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub cases: Vec<CaseEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_NAME);
        if !path.is_file() {
            return Err(Error::FileNotFound(path));
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("manifest {}: {e}", path.display())))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest encode: {e}")))?;
        std::fs::write(dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }

    pub fn find(&self, id: &str) -> Result<&CaseEntry> {
        self.cases
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::Config(format!("case {id} not in manifest")))
    }
}

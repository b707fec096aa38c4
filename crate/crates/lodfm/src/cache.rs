//! One JSON file per (template, item), named by a hash of both.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sparql::Binding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub item: String,
    pub template: String,
    pub bindings: Vec<Binding>,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
}

#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

pub fn cache_key(template: &str, item: &str) -> String {
    let mut h = Sha256::new();
    h.update(template.as_bytes());
    h.update([0u8]);
    h.update(item.as_bytes());
    hex::encode(h.finalize())
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, template: &str, item: &str) -> PathBuf {
        self.dir.join(format!("{}.json", cache_key(template, item)))
    }

    /// `Ok(None)` when nothing is cached; unreadable or foreign files are errors.
    pub fn load(&self, template: &str, item: &str) -> std::io::Result<Option<CacheEntry>> {
        let path = self.path(template, item);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let entry: CacheEntry = serde_json::from_str(&text).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))
        })?;
        if entry.item != item || entry.template != template {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{} belongs to another item", path.display()),
            ));
        }
        Ok(Some(entry))
    }

    /// Writes through a temporary file and renames it into place.
    pub fn store(&self, entry: &CacheEntry) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer_pretty(&mut tmp, entry)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(&entry.template, &entry.item))
            .map_err(|e| e.error)?;
        Ok(())
    }
}

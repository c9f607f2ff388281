//! Content-addressed file cache.
//!
//! An entry lives at `<root>/<stage>/<k[0..2]>/<k>` where `k` is the SHA-256
//! of the stage name and every input that affects the stage's output. Writes
//! go through a temp file and a rename; identical keys always hold identical
//! bytes, so concurrent writers cannot corrupt an entry.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use crate::fsutil::write_atomic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStage {
    Variant,
    Generation,
    Score,
}

impl CacheStage {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheStage::Variant => "variant",
            CacheStage::Generation => "generation",
            CacheStage::Score => "score",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey {
    pub stage: CacheStage,
    pub digest: String,
}

/// Builds a key from length-prefixed parts so `("ab", "c")` and `("a", "bc")` differ.
#[derive(Debug)]
pub struct KeyBuilder {
    stage: CacheStage,
    hasher: Sha256,
}

impl KeyBuilder {
    pub fn new(stage: CacheStage) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(stage.as_str().as_bytes());
        Self { stage, hasher }
    }

    pub fn part(mut self, name: &str, value: impl AsRef<[u8]>) -> Self {
        let value = value.as_ref();
        for chunk in [name.as_bytes(), value] {
            self.hasher.update((chunk.len() as u64).to_le_bytes());
            self.hasher.update(chunk);
        }
        self
    }

    pub fn finish(self) -> CacheKey {
        CacheKey {
            stage: self.stage,
            digest: hex::encode(self.hasher.finalize()),
        }
    }
}

#[derive(Debug, Default)]
pub struct CacheStats {
    pub hits: AtomicUsize,
    pub misses: AtomicUsize,
}

impl CacheStats {
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}

#[derive(Debug)]
pub struct Cache {
    root: PathBuf,
    stats: CacheStats,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            stats: CacheStats::default(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, key: &CacheKey) -> PathBuf {
        self.root
            .join(key.stage.as_str())
            .join(&key.digest[..2])
            .join(&key.digest)
    }

    pub fn get(&self, key: &CacheKey) -> Option<Vec<u8>> {
        match std::fs::read(self.path(key)) {
            Ok(bytes) => {
                self.stats.hits.fetch_add(1, Ordering::Relaxed);
                Some(bytes)
            }
            Err(_) => {
                self.stats.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.path(key).is_file()
    }

    pub fn put(&self, key: &CacheKey, bytes: &[u8]) -> std::io::Result<()> {
        write_atomic(&self.path(key), bytes)
    }

    pub fn stats(&self) -> &CacheStats {
        &self.stats
    }
}

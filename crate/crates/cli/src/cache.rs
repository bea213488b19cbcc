//! Content-addressed cache for derived artifacts (extractions).
//!
//! An entry is keyed by a SHA-256 over its inputs and configuration and stores
//! the digest of its own payload, so a stale or hand-edited entry is detected
//! rather than silently reused.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, Context};
use crate::manifest::hex;

pub const CACHE_DIR_ENV: &str = "ASTTRANS_CACHE_DIR";

/// Incrementally builds a cache key from labelled parts.
#[derive(Clone, Default)]
pub struct KeyBuilder {
    hasher: Sha256,
}

impl KeyBuilder {
    pub fn new(namespace: &str) -> Self {
        let mut k = KeyBuilder::default();
        k.part("namespace", namespace.as_bytes());
        k.part("version", env!("CARGO_PKG_VERSION").as_bytes());
        k
    }

    pub fn part(&mut self, label: &str, bytes: &[u8]) -> &mut Self {
        // Length prefixes keep ("ab","c") and ("a","bc") apart.
        for chunk in [label.as_bytes(), bytes] {
            self.hasher.update((chunk.len() as u64).to_le_bytes());
            self.hasher.update(chunk);
        }
        self
    }

    pub fn finish(&self) -> String {
        hex(&self.hasher.clone().finalize())
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    payload_sha256: String,
    payload: String,
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    /// `ASTTRANS_CACHE_DIR` if set (empty disables caching), else a directory
    /// under the system temp dir.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(v) if v.is_empty() => Cache { dir: None },
            Some(v) => Cache {
                dir: Some(PathBuf::from(v)),
            },
            None => Cache {
                dir: Some(std::env::temp_dir().join("asttrans-cache")),
            },
        }
    }

    pub fn at(dir: &Path) -> Self {
        Cache {
            dir: Some(dir.to_path_buf()),
        }
    }

    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    fn entry_path(&self, namespace: &str, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{namespace}-{key}.json")))
    }

    /// Returns the cached value for `key`, computing and storing it on a miss.
    /// A present but inconsistent entry is an error.
    pub fn get_or_compute<T, F>(&self, namespace: &str, key: &str, compute: F) -> CliResult<(T, bool)>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> CliResult<T>,
    {
        let Some(path) = self.entry_path(namespace, key) else {
            return Ok((compute()?, false));
        };
        if path.exists() {
            let text = fs::read_to_string(&path).context(path.display())?;
            let entry: Entry = serde_json::from_str(&text).map_err(|e| inconsistent(&path, &e.to_string()))?;
            if entry.key != key {
                return Err(inconsistent(&path, "stored key differs from its file name"));
            }
            if hex(&Sha256::digest(entry.payload.as_bytes())) != entry.payload_sha256 {
                return Err(inconsistent(&path, "payload digest does not match"));
            }
            let value = serde_json::from_str(&entry.payload).map_err(|e| inconsistent(&path, &e.to_string()))?;
            log::debug!("cache hit {}", path.display());
            return Ok((value, true));
        }
        let value = compute()?;
        let payload = serde_json::to_string(&value)?;
        let entry = Entry {
            key: key.to_string(),
            payload_sha256: hex(&Sha256::digest(payload.as_bytes())),
            payload,
        };
        let dir = path.parent().expect("entry paths have a parent");
        fs::create_dir_all(dir).context(dir.display())?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_string(&entry)?).context(tmp.display())?;
        fs::rename(&tmp, &path).context(path.display())?;
        Ok((value, false))
    }
}

fn inconsistent(path: &Path, why: &str) -> CliError {
    CliError::invariant(format!(
        "cache entry {} is inconsistent ({why}); remove it or point {CACHE_DIR_ENV} elsewhere",
        path.display()
    ))
}

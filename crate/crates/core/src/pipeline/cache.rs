use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::imaging::GrayImage;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "SCOP_CACHE_DIR";

const MAGIC: &str = "scop-cache v1";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: BTreeMap<String, usize>,
    pub misses: BTreeMap<String, usize>,
    /// Entries rejected for a bad checksum or unreadable payload.
    pub corrupt: usize,
}

impl CacheStats {
    pub fn hits(&self, kind: &str) -> usize {
        self.hits.get(kind).copied().unwrap_or(0)
    }

    pub fn misses(&self, kind: &str) -> usize {
        self.misses.get(kind).copied().unwrap_or(0)
    }
}

/// Content-addressed artifact store: `<dir>/<kind>/<key>`, each file a
/// header line with the payload's sha256 followed by the payload.
#[derive(Debug, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
    stats: Mutex<CacheStats>,
}

/// sha256 over dimensions and pixel values.
pub fn image_hash(image: &GrayImage) -> String {
    let mut h = Sha256::new();
    h.update((image.width() as u64).to_le_bytes());
    h.update((image.height() as u64).to_le_bytes());
    for &p in image.pixels() {
        h.update(p.to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl Cache {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: Some(dir.into()), stats: Mutex::default() }
    }

    /// Directory from `SCOP_CACHE_DIR`; disabled when unset or empty.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Self::at(PathBuf::from(d)),
            _ => Self::disabled(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn stats(&self) -> CacheStats {
        self.stats.lock().unwrap().clone()
    }

    /// Key from an artifact kind and the parts it depends on.
    pub fn key(kind: &str, parts: &[&str]) -> String {
        let mut h = Sha256::new();
        h.update(kind.as_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, kind: &str, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(kind).join(key))
    }

    fn count(&self, kind: &str, hit: bool) {
        let mut s = self.stats.lock().unwrap();
        let map = if hit { &mut s.hits } else { &mut s.misses };
        *map.entry(kind.to_string()).or_default() += 1;
    }

    fn reject(&self, path: &Path, why: &str) {
        log::warn!("discarding cache entry {}: {why}", path.display());
        self.stats.lock().unwrap().corrupt += 1;
        let _ = std::fs::remove_file(path);
    }

    /// Verified payload, or `None` on a miss or a rejected entry.
    pub fn load(&self, kind: &str, key: &str) -> Option<String> {
        let path = self.path(kind, key)?;
        let Ok(text) = std::fs::read_to_string(&path) else {
            return None;
        };
        let Some((header, payload)) = text.split_once('\n') else {
            self.reject(&path, "missing header");
            return None;
        };
        let expected = format!("{MAGIC} {kind} {}", hex::encode(Sha256::digest(payload.as_bytes())));
        if header != expected {
            self.reject(&path, "checksum mismatch");
            return None;
        }
        Some(payload.to_string())
    }

    /// Best-effort write (temporary file then rename).
    pub fn store(&self, kind: &str, key: &str, payload: &str) {
        let Some(path) = self.path(kind, key) else {
            return;
        };
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(path.parent().unwrap())?;
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            let header = format!("{MAGIC} {kind} {}\n", hex::encode(Sha256::digest(payload.as_bytes())));
            std::fs::write(&tmp, [header.as_bytes(), payload.as_bytes()].concat())?;
            std::fs::rename(&tmp, &path)
        };
        if let Err(e) = write() {
            log::warn!("could not write cache entry {}: {e}", path.display());
        }
    }

    /// Loads and decodes a cached artifact, or computes and stores it. A
    /// payload that fails to decode counts as corrupt and is recomputed.
    pub fn get_or_compute<T, E>(
        &self,
        kind: &str,
        key: &str,
        compute: impl FnOnce() -> Result<T, E>,
        encode: impl FnOnce(&T) -> String,
        decode: impl FnOnce(&str) -> Option<T>,
    ) -> Result<T, E> {
        if let Some(payload) = self.load(kind, key) {
            if let Some(v) = decode(&payload) {
                self.count(kind, true);
                return Ok(v);
            }
            self.reject(&self.path(kind, key).unwrap(), "undecodable payload");
        }
        self.count(kind, false);
        let v = compute()?;
        if self.dir.is_some() {
            self.store(kind, key, &encode(&v));
        }
        Ok(v)
    }

    /// `get_or_compute` with JSON encoding.
    pub fn json<T, E>(&self, kind: &str, key: &str, compute: impl FnOnce() -> Result<T, E>) -> Result<T, E>
    where
        T: serde::Serialize + serde::de::DeserializeOwned,
    {
        self.get_or_compute(
            kind,
            key,
            compute,
            |v| serde_json::to_string(v).expect("artifact serialises"),
            |s| serde_json::from_str(s).ok(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path());
        let key = Cache::key("demo", &["a", "b"]);
        assert_ne!(key, Cache::key("demo", &["ab"]));
        let v: Result<Vec<f64>, ()> = cache.json("demo", &key, || Ok(vec![0.1, 1.0 / 3.0]));
        assert_eq!(cache.stats().misses("demo"), 1);
        let again: Result<Vec<f64>, ()> = cache.json("demo", &key, || panic!("should hit"));
        assert_eq!(again, v);
        assert_eq!(cache.stats().hits("demo"), 1);

        let path = dir.path().join("demo").join(&key);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("0.1", "0.2")).unwrap();
        let fresh: Result<Vec<f64>, ()> = cache.json("demo", &key, || Ok(vec![0.1, 1.0 / 3.0]));
        assert_eq!(fresh, v);
        assert_eq!(cache.stats().corrupt, 1);
        assert!(cache.load("demo", &key).is_some());
    }

    #[test]
    fn disabled_cache_always_computes() {
        let cache = Cache::disabled();
        let mut calls = 0;
        for _ in 0..2 {
            let _: Result<u32, ()> = cache.json("x", "k", || {
                calls += 1;
                Ok(3)
            });
        }
        assert_eq!(calls, 2);
    }

    #[test]
    fn image_hash_depends_on_shape() {
        let a = GrayImage::new(2, 1, vec![1, 2]).unwrap();
        let b = GrayImage::new(1, 2, vec![1, 2]).unwrap();
        assert_ne!(image_hash(&a), image_hash(&b));
        assert_eq!(image_hash(&a), image_hash(&a.clone()));
    }
}

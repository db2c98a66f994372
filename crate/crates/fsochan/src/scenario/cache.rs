use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::qmc::Budget;
use crate::turbulence::{ChannelParams, ChannelStats, KERNEL_VERSION};

pub const CACHE_DIR_ENV: &str = "FSOCHAN_CACHE_DIR";

/// Cache directory from the environment, falling back to the user cache.
pub fn default_cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os(CACHE_DIR_ENV) {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(d).join("fsochan");
    }
    if let Some(h) = std::env::var_os("HOME") {
        return PathBuf::from(h).join(".cache").join("fsochan");
    }
    PathBuf::from(".fsochan-cache")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsCacheEntry {
    pub key: String,
    pub params: ChannelParams,
    pub budget: Budget,
    pub seed: u64,
    pub kernel_version: String,
    pub stats: ChannelStats,
    /// SHA-256 of the serialized `stats`.
    pub checksum: String,
    pub created_unix: u64,
}

#[derive(Serialize)]
struct KeyInput<'a> {
    params: &'a ChannelParams,
    budget: &'a Budget,
    seed: u64,
    kernel_version: &'a str,
}

pub fn cache_key(params: &ChannelParams, budget: Budget, seed: u64) -> String {
    let input = KeyInput {
        params,
        budget: &budget,
        seed,
        kernel_version: KERNEL_VERSION,
    };
    hex::encode(Sha256::digest(serde_json::to_vec(&input).expect("key serializes")))
}

fn checksum(stats: &ChannelStats) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(stats).expect("stats serialize")))
}

#[derive(Debug)]
pub enum Lookup {
    Hit(StatsCacheEntry),
    Miss,
    /// Unreadable or inconsistent entry; treated as a miss.
    Corrupt(String),
}

#[derive(Debug, Clone)]
pub struct StatsCache {
    dir: PathBuf,
}

impl StatsCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        StatsCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, params: &ChannelParams, budget: Budget, seed: u64) -> Lookup {
        let key = cache_key(params, budget, seed);
        let text = match std::fs::read_to_string(self.path(&key)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Lookup::Miss,
            Err(e) => return Lookup::Corrupt(e.to_string()),
        };
        let entry: StatsCacheEntry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(e) => return Lookup::Corrupt(format!("unparsable entry: {e}")),
        };
        if entry.key != key
            || entry.params != *params
            || entry.budget != budget
            || entry.seed != seed
            || entry.kernel_version != KERNEL_VERSION
        {
            return Lookup::Corrupt("entry does not match its key".into());
        }
        if checksum(&entry.stats) != entry.checksum {
            return Lookup::Corrupt("checksum mismatch".into());
        }
        Lookup::Hit(entry)
    }

    /// Writes to a temporary file in the cache directory and renames it into place.
    pub fn put(&self, params: &ChannelParams, budget: Budget, seed: u64, stats: &ChannelStats) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let key = cache_key(params, budget, seed);
        let entry = StatsCacheEntry {
            key: key.clone(),
            params: *params,
            budget,
            seed,
            kernel_version: KERNEL_VERSION.to_string(),
            stats: stats.clone(),
            checksum: checksum(stats),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(serde_json::to_string_pretty(&entry).expect("entry serializes").as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(&key)).map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turbulence::channel_stats;

    fn vacuum() -> ChannelParams {
        ChannelParams {
            cn2: 0.0,
            wavelength: 800e-9,
            length: 1000.0,
            w0: 0.02,
            aperture_radius: 0.04,
            extinction_db_per_km: 1.0,
        }
    }

    #[test]
    fn round_trip_and_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = StatsCache::new(dir.path().join("c"));
        let p = vacuum();
        let b = Budget::new(1 << 10, 4);
        assert!(matches!(cache.get(&p, b, 1), Lookup::Miss));
        let s = channel_stats(&p, b, 1).unwrap();
        cache.put(&p, b, 1, &s).unwrap();
        match cache.get(&p, b, 1) {
            Lookup::Hit(e) => assert_eq!(e.stats, s),
            other => panic!("{other:?}"),
        }
        assert!(matches!(cache.get(&p, Budget::new(1 << 11, 4), 1), Lookup::Miss));
        assert!(matches!(cache.get(&p, b, 2), Lookup::Miss));
        let q = ChannelParams { length: 1001.0, ..p };
        assert!(matches!(cache.get(&q, b, 1), Lookup::Miss));
    }

    #[test]
    fn corrupt_entries_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cache = StatsCache::new(dir.path());
        let p = vacuum();
        let b = Budget::new(1 << 10, 4);
        let s = channel_stats(&p, b, 1).unwrap();
        cache.put(&p, b, 1, &s).unwrap();
        let path = cache.path(&cache_key(&p, b, 1));
        // tamper with a statistic but keep valid JSON
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        v["stats"]["stats"]["mean_eta"] = serde_json::json!(0.5);
        std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
        assert!(matches!(cache.get(&p, b, 1), Lookup::Corrupt(_)));
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(cache.get(&p, b, 1), Lookup::Corrupt(_)));
    }

    #[test]
    fn key_depends_on_every_input() {
        let p = vacuum();
        let b = Budget::new(1 << 10, 4);
        let k = cache_key(&p, b, 0);
        assert_eq!(k.len(), 64);
        assert_eq!(k, cache_key(&p, b, 0));
        assert_ne!(k, cache_key(&p, Budget::new(1 << 10, 8), 0));
        assert_ne!(k, cache_key(&ChannelParams { w0: 0.021, ..p }, b, 0));
    }
}

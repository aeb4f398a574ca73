use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::LlmRequest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: LlmRequest,
    pub text: String,
    pub created_at: String,
}

/// Directory of `<request-hash>.json` files.
///
/// Reads go straight to the filesystem. Writes are serialized and land via
/// rename, so a reader never sees a half-written entry.
pub struct DiskCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl DiskCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> io::Result<Option<CacheEntry>> {
        match fs::read(self.path_for(key)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put(&self, key: &str, entry: &CacheEntry) -> io::Result<()> {
        let _guard = self.write_lock.lock().unwrap();
        let target = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, entry)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(tmp, target)
    }

    pub fn len(&self) -> io::Result<usize> {
        Ok(fs::read_dir(&self.dir)?
            .filter_map(Result::ok)
            .filter(|e| {
                e.path().extension().is_some_and(|x| x == "json")
                    && !e.file_name().to_string_lossy().starts_with('.')
            })
            .count())
    }

    pub fn is_empty(&self) -> io::Result<bool> {
        self.len().map(|n| n == 0)
    }
}

//! Write-once result cache keyed by config fingerprint.
//!
//! An entry is a file `<fingerprint>.json` whose first line is the hex
//! SHA-256 of the rest. Entries whose checksum does not match are never
//! served.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::experiments::ResultRecord;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "HERALD_CACHE_DIR";

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to a temporary sibling and renames it over `path`, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(
        ".{name}.tmp-{}-{}",
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

fn checksum(body: &str) -> String {
    Sha256::digest(body.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
pub enum Lookup {
    Hit(ResultRecord),
    Miss,
    /// Entry present but unreadable or failing its checksum.
    Corrupt(String),
}

#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    pub fn load(&self, fingerprint: &str) -> Lookup {
        let path = self.entry_path(fingerprint);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Lookup::Miss,
            Err(e) => return Lookup::Corrupt(e.to_string()),
        };
        let Some((sum, body)) = text.split_once('\n') else {
            return Lookup::Corrupt("missing checksum line".into());
        };
        if sum != checksum(body) {
            return Lookup::Corrupt("checksum mismatch".into());
        }
        match serde_json::from_str::<ResultRecord>(body) {
            Ok(r) if r.fingerprint == fingerprint => Lookup::Hit(r),
            Ok(_) => Lookup::Corrupt("entry belongs to another fingerprint".into()),
            Err(e) => Lookup::Corrupt(e.to_string()),
        }
    }

    /// Stores `record` unless a valid entry already exists. Concurrent
    /// writers of the same fingerprint produce identical bytes, and the
    /// rename makes the last one win atomically.
    pub fn store(&self, record: &ResultRecord) -> Result<()> {
        if let Lookup::Hit(_) = self.load(&record.fingerprint) {
            return Ok(());
        }
        let body = serde_json::to_string(record).expect("serializable");
        let entry = format!("{}\n{body}", checksum(&body));
        write_atomic(&self.entry_path(&record.fingerprint), entry.as_bytes())
    }
}

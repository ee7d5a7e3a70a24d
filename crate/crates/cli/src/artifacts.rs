//! Content-addressed artifact store: `<stage>-<input hash>.<ext>` files plus
//! `manifest.json` naming the current file of every stage.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".peacelex.lock";
const HASH_CHARS: usize = 16;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over tagged parts, each length-prefixed so boundaries are unambiguous.
#[derive(Default)]
pub struct InputHash(Sha256);

impl InputHash {
    pub fn new(stage: &str) -> Self {
        let mut h = Self::default();
        h.add(stage.as_bytes());
        h
    }

    pub fn add(&mut self, part: &[u8]) -> &mut Self {
        self.0.update((part.len() as u64).to_le_bytes());
        self.0.update(part);
        self
    }

    pub fn add_json<T: Serialize>(&mut self, value: &T) -> &mut Self {
        let s = serde_json::to_vec(value).expect("hash input serializes");
        self.add(&s)
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub file: String,
    pub input_hash: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub artifacts: BTreeMap<String, Entry>,
}

/// Exclusive handle on an output directory. The lock file is removed on drop.
pub struct Store {
    dir: PathBuf,
    manifest: Manifest,
    lock: PathBuf,
}

impl Store {
    pub fn open(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let lock = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(CliError::Locked(lock)),
            Err(e) => return Err(CliError::io(&lock, e)),
        }
        let mut store = Store {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                format_version: 1,
                artifacts: BTreeMap::new(),
            },
            lock,
        };
        let path = dir.join(MANIFEST);
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            store.manifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Core(peacelex::Error::Parse(format!("{}: {e}", path.display()))))?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn entry(&self, key: &str) -> CliResult<&Entry> {
        let e = self
            .manifest
            .artifacts
            .get(key)
            .ok_or_else(|| CliError::MissingArtifact(key.to_string()))?;
        if !self.dir.join(&e.file).exists() {
            return Err(CliError::MissingArtifact(e.file.clone()));
        }
        Ok(e)
    }

    pub fn read(&self, key: &str) -> CliResult<(Entry, Vec<u8>)> {
        let e = self.entry(key)?.clone();
        let path = self.dir.join(&e.file);
        let bytes = fs::read(&path).map_err(|err| CliError::io(&path, err))?;
        Ok((e, bytes))
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, key: &str) -> CliResult<(Entry, T)> {
        let (e, bytes) = self.read(key)?;
        let v = serde_json::from_slice(&bytes)
            .map_err(|err| CliError::Core(peacelex::Error::Parse(format!("{}: {err}", e.file))))?;
        Ok((e, v))
    }

    /// Entry is current for `input_hash` and its file is intact.
    pub fn is_fresh(&self, key: &str, input_hash: &str) -> bool {
        let Some(e) = self.manifest.artifacts.get(key) else {
            return false;
        };
        e.input_hash == input_hash && fs::read(self.dir.join(&e.file)).is_ok_and(|b| sha256_hex(&b) == e.content_hash)
    }

    /// Writes `<stem>-<hash>.<ext>`, replaces the previous file of `key`, and
    /// records it in the manifest.
    pub fn write(&mut self, key: &str, stem: &str, ext: &str, input_hash: &str, bytes: &[u8]) -> CliResult<Entry> {
        let file = format!("{stem}-{}.{ext}", &input_hash[..HASH_CHARS]);
        let path = self.dir.join(&file);
        write_atomic(&path, bytes)?;
        let entry = Entry {
            file: file.clone(),
            input_hash: input_hash.to_string(),
            content_hash: sha256_hex(bytes),
        };
        if let Some(old) = self.manifest.artifacts.insert(key.to_string(), entry.clone()) {
            let still_used = self.manifest.artifacts.values().any(|e| e.file == old.file);
            if old.file != file && !still_used {
                let _ = fs::remove_file(self.dir.join(&old.file));
            }
        }
        self.save_manifest()?;
        Ok(entry)
    }

    fn save_manifest(&self) -> CliResult<()> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())
    }
}

impl Drop for Store {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_open_is_locked_until_drop() {
        let dir = tempfile::tempdir().unwrap();
        let a = Store::open(dir.path()).unwrap();
        let e = Store::open(dir.path()).err().unwrap();
        assert!(matches!(e, CliError::Locked(_)));
        assert_eq!(e.exit_code(), crate::error::EXIT_LOCKED);
        drop(a);
        assert!(Store::open(dir.path()).is_ok());
    }

    #[test]
    fn write_is_content_addressed_and_replaces_stale_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::open(dir.path()).unwrap();
        let h1 = sha256_hex(b"one");
        let e1 = s.write("stage", "stage", "json", &h1, b"{}").unwrap();
        assert_eq!(e1.file, format!("stage-{}.json", &h1[..16]));
        assert!(s.is_fresh("stage", &h1));
        let h2 = sha256_hex(b"two");
        assert!(!s.is_fresh("stage", &h2));
        let e2 = s.write("stage", "stage", "json", &h2, b"[]").unwrap();
        assert!(!dir.path().join(&e1.file).exists());
        assert!(dir.path().join(&e2.file).exists());
        drop(s);

        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.entry("stage").unwrap(), &e2);
        assert!(matches!(s.entry("other"), Err(CliError::MissingArtifact(_))));
        fs::write(dir.path().join(&e2.file), "tampered").unwrap();
        assert!(!s.is_fresh("stage", &h2));
    }

    #[test]
    fn input_hash_separates_parts() {
        let mut a = InputHash::new("x");
        a.add(b"ab").add(b"c");
        let mut b = InputHash::new("x");
        b.add(b"a").add(b"bc");
        assert_ne!(a.finish(), b.finish());
    }
}

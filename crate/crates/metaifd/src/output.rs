//! Output files: atomic writes, run manifests and error records.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::digest;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Serializes rows with a header to CSV bytes.
pub fn csv_bytes<S: AsRef<str>>(header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref())).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// What one command produced. Everything in it is a function of the
/// configuration and seed, so reruns give byte-identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of the resolved configuration (canonical TOML).
    pub config_hash: String,
    pub seed: u64,
    /// The resolved configuration the command ran with.
    pub config: String,
    /// Output file name → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    pub fn path(out: &Path, command: &str) -> PathBuf {
        out.join(Self::file_name(command))
    }
}

/// Collects files written by a command for its manifest.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            written: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.written.insert(name.to_string(), digest(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_csv<S: AsRef<str>>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<S>>,
    ) -> Result<PathBuf> {
        self.write(name, &csv_bytes(header, rows))
    }

    pub fn outputs(&self) -> &BTreeMap<String, String> {
        &self.written
    }

    /// Writes `<command>.manifest.json` and returns the manifest's digest.
    pub fn finish(self, command: &str, config: &str, seed: u64) -> Result<(Manifest, String)> {
        let manifest = Manifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            config_hash: digest(config.as_bytes()),
            seed,
            config: config.to_string(),
            outputs: self.written,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&Manifest::path(&self.root, command), &bytes)?;
        Ok((manifest, digest(&bytes)))
    }
}

/// Machine-readable failure description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub command: String,
    pub kind: String,
    pub message: String,
    pub version: String,
}

impl ErrorRecord {
    pub fn new(command: &str, err: &Error) -> Self {
        Self {
            command: command.to_string(),
            kind: err.kind().to_string(),
            message: err.to_string(),
            version: VERSION.to_string(),
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}.error.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::new(dir.path()).unwrap();
        out.write_csv("t.csv", &["a", "b"], [vec!["1", "2"]]).unwrap();
        let (m, hash) = out.finish("demo", "seed = 3\n", 3).unwrap();
        assert_eq!(m.outputs["t.csv"], digest(b"a,b\n1,2\n"));
        let stored = fs::read(Manifest::path(dir.path(), "demo")).unwrap();
        assert_eq!(digest(&stored), hash);
    }
}

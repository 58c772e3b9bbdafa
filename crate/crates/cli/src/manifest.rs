//! Output bundles and their content-hash manifest.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_NAME: &str = "manifest.txt";

/// In-memory artifacts of one run, keyed by relative path.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        let name = name.into();
        self.files.retain(|(n, _)| *n != name);
        self.files.push((name, bytes));
    }

    pub fn text(&mut self, name: impl Into<String>, text: String) {
        self.add(name, text.into_bytes());
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every artifact below `dir` followed by the manifest.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            let p = dir.join(name);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, bytes)?;
        }
        let manifest = Manifest::of(self);
        std::fs::write(dir.join(MANIFEST_NAME), manifest.to_text())?;
        Ok(manifest)
    }
}

/// Sorted `(path, sha256)` pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn of(artifacts: &Artifacts) -> Self {
        let mut entries: Vec<(String, String)> = artifacts
            .files
            .iter()
            .map(|(n, b)| (n.clone(), sha256_hex(b)))
            .collect();
        entries.sort();
        Manifest { entries }
    }

    /// One `<sha256>  <path>` line per artifact.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(n, h)| format!("{h}  {n}\n")).collect()
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut entries = Vec::new();
        for line in text.lines() {
            let (h, n) = line.split_once("  ")?;
            entries.push((n.to_string(), h.to_string()));
        }
        Some(Manifest { entries })
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_NAME))?;
        Ok(Manifest::parse(&text))
    }

    /// Hash of the manifest text, a single fingerprint for the whole run.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    pub fn paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.entries.iter().map(|(n, _)| dir.join(n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip_and_order() {
        let mut a = Artifacts::default();
        a.text("b.csv", "2\n".into());
        a.text("a.csv", "1\n".into());
        a.text("a.csv", "1b\n".into());
        let m = Manifest::of(&a);
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].0, "a.csv");
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
        let dir = tempfile::tempdir().unwrap();
        let written = a.write(dir.path()).unwrap();
        assert_eq!(written, m);
        assert_eq!(Manifest::load(dir.path()).unwrap().unwrap(), m);
        assert_eq!(std::fs::read_to_string(dir.path().join("a.csv")).unwrap(), "1b\n");
    }
}

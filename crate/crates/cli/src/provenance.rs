//! Input hashing for provenance records.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

fn files_under(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries = fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<Vec<_>>>()?;
        entries.sort();
        for e in entries {
            files_under(&e, out)?;
        }
    } else if path.file_name().is_none_or(|n| n != "provenance.json") {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// `{path: sha256}` over every file of the given inputs, directories
/// expanded recursively in sorted order.
pub fn hash_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<Value> {
    let mut files = Vec::new();
    for p in paths {
        files_under(p, &mut files)?;
    }
    let mut out = Map::new();
    for f in files {
        let bytes = fs::read(&f).with_context(|| format!("reading {}", f.display()))?;
        out.insert(
            f.display().to_string(),
            Value::String(hex::encode(Sha256::digest(&bytes))),
        );
    }
    Ok(Value::Object(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_hashes_are_sorted_and_skip_provenance() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "b").unwrap();
        fs::write(dir.path().join("a.txt"), "").unwrap();
        fs::write(dir.path().join("provenance.json"), "{}").unwrap();
        let v = hash_inputs([dir.path()]).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 2);
        assert!(keys[0].ends_with("a.txt"));
        assert_eq!(
            v[&keys[0]],
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}

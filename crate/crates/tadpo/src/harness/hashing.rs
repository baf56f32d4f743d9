//! Content hashing for determinism checks: identical experiment inputs must
//! produce byte-identical artifacts, and these helpers are how tests and the
//! reproduction suites prove it.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Hash every file under `root` (recursively) into a sorted
/// relative-path → digest map. Files whose *name* appears in `skip` are
/// left out — used to exclude wall-clock-bearing records from determinism
/// comparisons.
pub fn hash_tree(root: impl AsRef<Path>, skip: &[&str]) -> Result<BTreeMap<String, String>> {
    let root = root.as_ref();
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        // Sorted traversal keeps error ordering deterministic too.
        let mut entries: Vec<_> = std::fs::read_dir(&dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if !skip.iter().any(|s| entry.file_name().to_string_lossy() == *s) {
                let rel = path.strip_prefix(root).expect("walked from root").to_string_lossy().replace('\\', "/");
                out.insert(rel, sha256_file(&path)?);
            }
        }
    }
    Ok(out)
}

/// One digest over a whole tree manifest.
pub fn combined_hash(manifest: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (path, digest) in manifest {
        h.update(path.as_bytes());
        h.update([0]);
        h.update(digest.as_bytes());
        h.update([b'\n']);
    }
    format!("{:x}", h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_hash_is_the_standard_vector() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn tree_hash_sees_nested_files_and_skips_by_name() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("a.txt"), "one").unwrap();
        std::fs::write(dir.path().join("sub/b.txt"), "two").unwrap();
        std::fs::write(dir.path().join("sub/clock.json"), "varies").unwrap();

        let m = hash_tree(dir.path(), &["clock.json"]).unwrap();
        assert_eq!(m.keys().collect::<Vec<_>>(), vec!["a.txt", "sub/b.txt"]);
        assert_eq!(m["a.txt"], sha256_hex(b"one"));

        // Same content, different directory: same manifest and digest.
        let dir2 = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir2.path().join("sub")).unwrap();
        std::fs::write(dir2.path().join("a.txt"), "one").unwrap();
        std::fs::write(dir2.path().join("sub/b.txt"), "two").unwrap();
        let m2 = hash_tree(dir2.path(), &[]).unwrap();
        assert_eq!(combined_hash(&m), combined_hash(&m2));

        // Any content change shifts the combined digest.
        std::fs::write(dir2.path().join("sub/b.txt"), "TWO").unwrap();
        let m3 = hash_tree(dir2.path(), &[]).unwrap();
        assert_ne!(combined_hash(&m), combined_hash(&m3));
    }
}

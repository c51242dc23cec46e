use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha1::{Digest, Sha1};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

/// Git blob hash: SHA-1 of `"blob <len>\0"` followed by the content.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::with_capacity(40), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(git_blob_hash(&bytes))
}

/// Run manifest: resolved config, input hashes and produced artifacts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub task: String,
    pub seed: u64,
    /// `(label, hash, path)`.
    pub inputs: Vec<(String, String, PathBuf)>,
    pub artifacts: Vec<PathBuf>,
    pub resolved_config: String,
    /// Free-form `key = value` result lines.
    pub results: Vec<(String, String)>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# inrr run manifest");
        let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "task = {}", self.task);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "\n[inputs]");
        for (label, hash, path) in &self.inputs {
            let _ = writeln!(out, "{label} {hash} {}", path.display());
        }
        let _ = writeln!(out, "\n[results]");
        for (k, v) in &self.results {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "\n[artifacts]");
        for a in &self.artifacts {
            let _ = writeln!(out, "{}", a.display());
        }
        let _ = writeln!(out, "\n[resolved_config]");
        out.push_str(&self.resolved_config);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

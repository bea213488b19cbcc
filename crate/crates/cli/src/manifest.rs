use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, Context};

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub version: String,
    pub duration_secs: f64,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = fs::File::open(path).context(path.display())?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Where the manifest for `out` goes: inside it for a directory, beside it
/// (`<file>.manifest.json`) for a file.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join(MANIFEST_NAME)
    } else {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

fn absolute(p: &Path) -> PathBuf {
    if let Ok(c) = p.canonicalize() {
        return c;
    }
    // Output files may not exist yet.
    match (p.parent(), p.file_name()) {
        (Some(parent), Some(name)) if !parent.as_os_str().is_empty() => parent
            .canonicalize()
            .map(|c| c.join(name))
            .unwrap_or_else(|_| p.to_path_buf()),
        _ => std::env::current_dir()
            .map(|d| d.join(p))
            .unwrap_or_else(|_| p.to_path_buf()),
    }
}

/// Refuses to run when an output would overwrite one of the inputs.
pub fn ensure_not_inputs(inputs: &[&Path], outputs: &[&Path]) -> CliResult<()> {
    for o in outputs {
        let out = absolute(o);
        for i in inputs {
            let inp = absolute(i);
            if out == inp {
                return Err(CliError::usage(format!(
                    "output {} would overwrite input {}",
                    o.display(),
                    i.display()
                )));
            }
        }
    }
    Ok(())
}

/// Collects what a run touched and writes the manifest at the end.
pub struct RunRecorder {
    command: String,
    started: Instant,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seeds: BTreeMap<String, u64>,
}

impl RunRecorder {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunRecorder {
            command: command.to_string(),
            started: Instant::now(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        if !self.inputs.iter().any(|x| x == p) {
            self.inputs.push(p.to_path_buf());
        }
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn set_resolved(&mut self, key: &str, value: serde_json::Value) {
        if let serde_json::Value::Object(map) = &mut self.config {
            map.insert(key.to_string(), value);
        }
    }

    /// Writes the manifest for a run whose primary output is `out`.
    pub fn finish(self, out: &Path, is_dir: bool) -> CliResult<PathBuf> {
        let inputs = self
            .inputs
            .iter()
            .filter(|p| p.is_file())
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            inputs,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            seeds: self.seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = manifest_path(out, is_dir);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).context(path.display())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_location() {
        assert_eq!(
            manifest_path(Path::new("out"), true),
            Path::new("out/run_manifest.json")
        );
        assert_eq!(
            manifest_path(Path::new("a/model.bin"), false),
            Path::new("a/model.bin.manifest.json")
        );
    }

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn overwriting_an_input_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("in.txt");
        fs::write(&p, "x").unwrap();
        assert!(ensure_not_inputs(&[&p], &[&p]).is_err());
        assert!(ensure_not_inputs(&[&p], &[&dir.path().join("out.txt")]).is_ok());
    }
}

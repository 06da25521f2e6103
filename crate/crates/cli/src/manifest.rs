use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};
use tractoformer::config::KeyValues;
use tractoformer::Result;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hex = String::with_capacity(64);
    for b in Sha256::digest(&bytes) {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

/// Record of one pipeline invocation: what ran, with which resolved
/// parameters, and the digests of everything read and written.
pub struct RunManifest {
    command: String,
    config: Option<PathBuf>,
    params: Vec<(String, String)>,
    seeds: Vec<(String, u64)>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>) -> Self {
        Self {
            command: command.to_string(),
            config: config.map(Path::to_path_buf),
            params: Vec::new(),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn params(&mut self, kv: &KeyValues) {
        for (k, v) in kv.iter() {
            self.param(k, v);
        }
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.seeds.push((name.to_string(), seed));
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        if let Some(c) = &self.config {
            let _ = writeln!(s, "config = {}", c.display());
        }
        for (k, v) in &self.params {
            let _ = writeln!(s, "param.{k} = {v}");
        }
        for (k, v) in &self.seeds {
            let _ = writeln!(s, "seed.{k} = {v}");
        }
        for p in &self.inputs {
            let _ = writeln!(s, "input.{} = sha256:{}", p.display(), sha256_file(p)?);
        }
        for p in &self.outputs {
            let _ = writeln!(s, "output.{} = sha256:{}", p.display(), sha256_file(p)?);
        }
        let _ = writeln!(s, "duration_s = {:.3}", self.started.elapsed().as_secs_f64());
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }
}

/// `out.trx` -> `out.trx.manifest`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

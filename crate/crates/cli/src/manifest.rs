//! Run manifests: the resolved configuration, seeds, timings and file digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub pattern: Option<usize>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    /// Worker threads used; results are reproducible at a fixed count.
    pub threads: usize,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, Vec<u64>>,
    pub timings: Vec<StageTiming>,
    /// SHA-256 of each input, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output, keyed by path relative to the run directory.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            threads: rayon::current_num_threads(),
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            timings: Vec::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn time<T>(&mut self, stage: &str, pattern: Option<usize>, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.record(stage, pattern, start.elapsed().as_secs_f64());
        Ok(out)
    }

    pub fn record(&mut self, stage: &str, pattern: Option<usize>, seconds: f64) {
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            pattern,
            seconds,
        });
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        for p in with_payload(path) {
            self.inputs.insert(p.display().to_string(), digest(&p)?);
        }
        Ok(())
    }

    /// Records every regular file below `dir` except the manifest itself.
    pub fn collect_outputs(&mut self, dir: &Path) -> Result<()> {
        self.outputs.clear();
        let mut files = Vec::new();
        walk(dir, &mut files)?;
        for f in files {
            let rel = f.strip_prefix(dir).expect("below run directory");
            if rel == Path::new(MANIFEST_FILE) {
                continue;
            }
            self.outputs.insert(portable(rel), digest(&f)?);
        }
        Ok(())
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        self.collect_outputs(dir)?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Checks that every listed output exists under `dir` with its digest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (rel, expected) in &self.outputs {
            let p = dir.join(rel);
            let actual = digest(&p).with_context(|| format!("missing output {rel}"))?;
            if &actual != expected {
                bail!("digest mismatch for {rel}");
            }
        }
        Ok(())
    }
}

fn portable(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn with_payload(path: &Path) -> Vec<PathBuf> {
    let payload = coacs_core::io::payload_path(path);
    if payload.exists() {
        vec![path.to_path_buf(), payload]
    } else {
        vec![path.to_path_buf()]
    }
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if e.file_type()?.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

pub fn digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force`.
pub fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            bail!("{} is not empty; pass --force to overwrite", dir.display());
        }
        if occupied {
            fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

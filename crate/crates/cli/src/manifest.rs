//! Per-run manifest: resolved configuration, its hash, seeds, toolkit
//! version, input and output digests. No timestamps, so reruns match.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::error::Result;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub toolkit_version: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub notes: BTreeMap<String, serde_json::Value>,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Output directory bookkeeping for one command.
pub struct Run<'a> {
    pub command: &'static str,
    pub config: &'a RunConfig,
    outputs: Vec<String>,
    inputs: BTreeMap<String, FileDigest>,
    pub seeds: Vec<u64>,
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl<'a> Run<'a> {
    pub fn new(command: &'static str, config: &'a RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&config.out_dir)?;
        Ok(Run {
            command,
            config,
            outputs: Vec::new(),
            inputs: BTreeMap::new(),
            seeds: Vec::new(),
            notes: BTreeMap::new(),
        })
    }

    /// Resolves a configured input path and records its digest.
    pub fn input(&mut self, key: &str) -> Result<PathBuf> {
        let path = self.config.path(key)?;
        let sha256 = file_sha256(&path).map_err(|e| e.context(format!("{key} ({})", path.display())))?;
        self.inputs.insert(
            key.to_string(),
            FileDigest { path: self.config.raw(key).to_string(), sha256 },
        );
        Ok(path)
    }

    pub fn open_input(&mut self, key: &str) -> Result<File> {
        let path = self.input(key)?;
        Ok(File::open(path)?)
    }

    /// Creates an output file (relative to the output directory).
    pub fn create(&mut self, rel: &str) -> Result<BufWriter<File>> {
        let path = self.config.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.outputs.push(rel.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes.insert(key.to_string(), serde_json::to_value(value).expect("serialisable note"));
    }

    pub fn finish(self) -> Result<PathBuf> {
        let mut outputs = Vec::new();
        for rel in &self.outputs {
            outputs.push(FileDigest {
                path: rel.clone(),
                sha256: file_sha256(&self.config.out_dir.join(rel))?,
            });
        }
        let manifest = Manifest {
            command: self.command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config.hash(),
            config: self.config.entries().clone(),
            seeds: self.seeds,
            inputs: self.inputs,
            outputs,
            notes: self.notes,
        };
        let path = self.config.out_dir.join(format!("manifest_{}.json", self.command.replace('-', "_")));
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }
}

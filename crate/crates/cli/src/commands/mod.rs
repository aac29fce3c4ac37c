//! Command implementations. Each one builds a results document, optionally
//! writes it and its data files under `--out`, and prints either the document
//! or its table on stdout.

pub mod bench;
pub mod biosense;
pub mod eval;
pub mod mc;
pub mod pipeline;
pub mod score;
pub mod stats;
pub mod synth;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::results::ResultsDocument;
use crate::{Format, UsageError};

pub const RESULTS_FILE: &str = "results.json";

#[derive(Debug, Clone)]
pub struct Ctx {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// A data file written next to `results.json`.
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

impl Artifact {
    pub fn new(name: &str, contents: impl Into<Vec<u8>>) -> Self {
        Self {
            name: name.to_string(),
            contents: contents.into(),
        }
    }
}

impl Ctx {
    /// The output directory, required by commands that produce files.
    pub fn out_dir(&self, command: &str) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| UsageError(format!("`{command}` needs --out <DIR>")).into())
    }

    /// Writes the document and artifacts under `--out` (if given) and prints
    /// the document, or `table` when `--format csv` is selected.
    pub fn emit(&self, doc: &ResultsDocument, table: Option<&str>, artifacts: &[Artifact]) -> Result<()> {
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            doc.write(&dir.join(RESULTS_FILE))?;
            for a in artifacts {
                let p = dir.join(&a.name);
                fs::write(&p, &a.contents).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        match (self.format, table) {
            (Format::Csv, Some(t)) => print!("{t}"),
            _ => print!("{}", doc.to_json()),
        }
        Ok(())
    }
}

/// Reads an input file; a missing file is a usage error.
pub fn read_input(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(UsageError(format!("input not found: {}", path.display())).into());
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        return Err(UsageError(format!("directory not found: {}", path.display())).into());
    }
    Ok(())
}

/// `1/0`, `true/false`, `yes/no` (case-insensitive).
pub fn parse_label(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "nvi" | "pos" => Some(true),
        "0" | "false" | "no" | "stable" | "neg" => Some(false),
        _ => None,
    }
}

/// Formats an `f64` so that it parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

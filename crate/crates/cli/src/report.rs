use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use tensorda::eval::ClassDivergence;

use crate::error::{CliError, WithPath};

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct TracePoint {
    pub iter: usize,
    pub loss: f64,
}

#[derive(Debug, Serialize)]
pub struct Discrepancy {
    pub d_a: f64,
    /// Absent when some class has fewer than two samples.
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub class: Option<ClassLevel>,
}

/// `class_basis` names the pair of sets compared class by class: source
/// and target features (`target`), or source before and after alignment
/// (`aligned_source`) when the target is unlabelled.
#[derive(Debug, Serialize)]
pub struct ClassLevel {
    pub d_a_w: f64,
    pub d_a_b: f64,
    pub j_s: f64,
    pub class_basis: &'static str,
}

impl ClassLevel {
    pub fn new(c: ClassDivergence, class_basis: &'static str) -> Self {
        ClassLevel {
            d_a_w: c.d_a_w,
            d_a_b: c.d_a_b,
            j_s: c.j_s,
            class_basis,
        }
    }
}

/// JSON report shared by all commands. Field order is fixed by the struct;
/// maps are sorted. Timings are opt-in so default reports are reproducible
/// byte for byte.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub tool_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub loss_trace: Vec<TracePoint>,
    pub accuracies: BTreeMap<String, f64>,
    pub discrepancies: BTreeMap<String, Discrepancy>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn new(command: &'static str, seed: Option<u64>, config: Value, timings: bool) -> Self {
        Report {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            loss_trace: Vec::new(),
            accuracies: BTreeMap::new(),
            discrepancies: BTreeMap::new(),
            warnings: Vec::new(),
            timings_ms: timings.then(BTreeMap::new),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        self.inputs.push(record(role, path)?);
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        self.outputs.push(record(role, path)?);
        Ok(())
    }

    /// Runs `f`, recording its wall time under `phase` when timings are on.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if let Some(t) = &mut self.timings_ms {
            t.insert(phase.to_string(), start.elapsed().as_secs_f64() * 1e3);
        }
        out
    }

    /// Writes the report to `path`, or to stdout when no path is given.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        match path {
            Some(p) => std::fs::write(p, text).at(p),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn record(role: &str, path: &Path) -> Result<FileRecord, CliError> {
    let bytes = std::fs::read(path).at(path)?;
    Ok(FileRecord {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

//! JSON run reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use seed_core::SeedError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    /// Per-stage wall times, where a command reports them.
    pub stages: BTreeMap<String, f64>,
}

impl Timings {
    pub fn push(&mut self, stage: String, seconds: f64) {
        self.stages.insert(stage, seconds);
    }
}

/// Everything except `timings` is a function of the invocation, seed and thread count.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub config: Value,
    pub metrics: Value,
    pub delta_trace: Vec<f64>,
    pub timings: Timings,
}

impl RunReport {
    pub fn new(command: &'static str, seed: u64, threads: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            threads,
            config: Value::Null,
            metrics: Value::Null,
            delta_trace: Vec::new(),
            timings: Timings::default(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), SeedError> {
        if let Some(v) = self
            .delta_trace
            .iter()
            .chain(self.timings.stages.values())
            .find(|v| !v.is_finite())
        {
            return Err(SeedError::Format(format!("report holds a non-finite value {v}")));
        }
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| SeedError::Format(format!("cannot serialize report: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// `h[s]` counts the columns with `s` nonzeros.
pub fn histogram(sparsity: &[usize]) -> Vec<usize> {
    let mut h = vec![0; sparsity.iter().copied().max().map_or(0, |m| m + 1)];
    for &s in sparsity {
        h[s] += 1;
    }
    h
}

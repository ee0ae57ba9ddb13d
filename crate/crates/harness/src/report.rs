//! Experiment reports: JSON for metrics, CSV for per-row data.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// A named pass/fail flag with a human-readable detail line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub run_id: String,
    pub params: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    /// Wall-clock measurements; the only part that varies between runs.
    pub timings: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ExperimentReport {
    pub fn new(run_id: impl Into<String>, params: serde_json::Value, columns: &[&str]) -> Self {
        ExperimentReport {
            run_id: run_id.into(),
            params,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn row(&mut self, values: Vec<String>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The report without timings, for reproducibility comparisons.
    pub fn deterministic_view(&self) -> ExperimentReport {
        ExperimentReport { timings: BTreeMap::new(), ..self.clone() }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting, so rows are reproducible bit for bit.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

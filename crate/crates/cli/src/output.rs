use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

/// A non-finite number reached an output.
#[derive(Debug)]
pub struct NonFinite(pub String);

impl std::fmt::Display for NonFinite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "non-finite value in {}", self.0)
    }
}

impl std::error::Error for NonFinite {}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> anyhow::Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(NonFinite(what.to_string()).into())
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    values: Vec<f64>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new(), values: Vec::new() }
    }

    /// Appends a row whose first cell is an integer key.
    pub fn push(&mut self, key: usize, values: &[f64]) {
        self.push_keyed(key.to_string(), values);
    }

    pub fn push_keyed(&mut self, key: String, values: &[f64]) {
        let mut row = vec![key];
        row.extend(values.iter().map(|&v| fmt_f64(v)));
        self.values.extend_from_slice(values);
        self.rows.push(row);
    }

    pub fn write(&self, path: &str) -> anyhow::Result<()> {
        ensure_finite(path, self.values.iter().copied())?;
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {path}"))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().with_context(|| format!("writing {path}"))?;
        Ok(())
    }
}

pub fn write_text(path: &str, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {path}"))
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub params: Value,
    pub duration_seconds: f64,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Value>,
}

pub fn manifest_path(out: &str) -> String {
    format!("{out}.manifest.json")
}

impl RunManifest {
    pub fn write(&self, out: &str) -> anyhow::Result<String> {
        let path = manifest_path(out);
        if let Some(dir) = Path::new(&path).parent().filter(|d| !d.as_os_str().is_empty()) {
            anyhow::ensure!(dir.is_dir(), "directory {} does not exist", dir.display());
        }
        write_text(&path, &serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

pub fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}

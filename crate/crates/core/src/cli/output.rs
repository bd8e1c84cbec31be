//! Metrics files and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::trainer::{History, MetricsRecord};

/// Streams records to `metrics.csv` and `metrics.jsonl`, flushing after each.
pub struct MetricsWriter {
    csv: BufWriter<File>,
    jsonl: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        let mut csv = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        writeln!(csv, "{}", MetricsRecord::CSV_HEADER)?;
        csv.flush()?;
        let jsonl = BufWriter::new(File::create(dir.join("metrics.jsonl"))?);
        Ok(MetricsWriter { csv, jsonl })
    }

    pub fn write(&mut self, rec: &MetricsRecord) -> Result<()> {
        writeln!(self.csv, "{}", rec.csv_row())?;
        writeln!(self.jsonl, "{}", serde_json::to_string(rec).expect("record serializes"))?;
        self.csv.flush()?;
        self.jsonl.flush()?;
        Ok(())
    }
}

/// Per-iteration loss, gradient norm and timing.
pub fn write_iters(dir: &Path, history: &History) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("iters.csv"))?);
    writeln!(w, "iter,loss,grad_norm,wall_ms")?;
    for s in &history.iters {
        writeln!(w, "{},{},{},{}", s.iter, s.loss, s.grad_norm, s.wall_ms)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history(dir: &Path, history: &History) -> Result<()> {
    let mut w = MetricsWriter::create(dir)?;
    for rec in &history.records {
        w.write(rec)?;
    }
    write_iters(dir, history)
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub seed: u64,
    /// Effective configuration after command-line overrides, as TOML.
    pub config: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn begin(command: &str, seed: u64, config: String, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            started_at: now(),
            finished_at: None,
            status: "running".into(),
            outputs,
        }
    }

    pub fn finish(&mut self, status: &str) {
        self.finished_at = Some(now());
        self.status = status.to_string();
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

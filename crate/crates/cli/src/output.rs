//! Row types and writers. Every table is written through [`Sink`], which
//! emits the header row even when there are no records.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateRow {
    pub t: f64,
    pub rule: String,
    pub n: usize,
    pub replications: usize,
    pub stale_rate_mean: f64,
    pub stale_rate_stderr: f64,
    pub fork_events: f64,
    pub measure_correlation: f64,
}

pub const SIMULATE_HEADER: [&str; 8] = [
    "t",
    "rule",
    "n",
    "replications",
    "stale_rate_mean",
    "stale_rate_stderr",
    "fork_events",
    "measure_correlation",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub id: u64,
    pub parent: u64,
    pub miner: u32,
    pub timestamp: f64,
    pub created_at: f64,
    pub height: u64,
    pub in_main_chain: bool,
}

pub const TRACE_HEADER: [&str; 7] = ["id", "parent", "miner", "timestamp", "created_at", "height", "in_main_chain"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaleRow {
    pub t: f64,
    pub lambda: f64,
    pub extension_prob: f64,
    pub stale_rate: f64,
    pub blocks_per_minute: f64,
}

pub const STALE_HEADER: [&str; 5] = ["t", "lambda", "extension_prob", "stale_rate", "blocks_per_minute"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub p_stale: f64,
    pub threshold: f64,
}

pub const THRESHOLD_HEADER: [&str; 2] = ["p_stale", "threshold"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Row {
    pub t: f64,
    pub analytic: f64,
    pub simulated_mean: f64,
    pub simulated_stderr: f64,
}

pub const FIGURE1_HEADER: [&str; 4] = ["t", "analytic", "simulated_mean", "simulated_stderr"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackRow {
    pub replication: usize,
    pub seed: u64,
    pub rule: String,
    /// `mallory`, `alice` or `split`.
    pub adopted: String,
    pub observers_on_mallory: usize,
    pub observers_on_alice: usize,
    pub alice_delta_s: Option<f64>,
    pub mallory_delta_s: Option<f64>,
    pub success: bool,
}

pub const ATTACK_HEADER: [&str; 9] = [
    "replication",
    "seed",
    "rule",
    "adopted",
    "observers_on_mallory",
    "observers_on_alice",
    "alice_delta_s",
    "mallory_delta_s",
    "success",
];

/// Where a command's main output goes.
pub struct Sink {
    out: Box<dyn Write>,
    format: Format,
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

impl Sink {
    pub fn open(path: Option<&PathBuf>, format: Format) -> Result<Self, CliError> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(create(p)?),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self { out, format })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn csv<R: Serialize>(&mut self, header: &[&str], rows: &[R]) -> Result<(), CliError> {
        write_csv(&mut self.out, header, rows)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut self.out, value).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(self.out).map_err(|e| CliError::Runtime(e.to_string()))
    }

    pub fn blank_line(&mut self) -> Result<(), CliError> {
        writeln!(self.out).map_err(|e| CliError::Runtime(e.to_string()))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::Runtime(e.to_string()))
    }
}

pub fn write_csv<W: Write, R: Serialize>(out: W, header: &[&str], rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

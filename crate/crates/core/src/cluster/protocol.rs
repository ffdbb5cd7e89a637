//! Wire format shared by master and workers.
//!
//! Every message is a frame: the byte length of the body as ASCII decimal,
//! a newline, then the body, a JSON object tagged by `"type"`. See
//! `docs/protocol.md` for the field list.

use std::io::{BufRead, Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::SplitDataset;
use crate::error::{Error, Result};
use crate::evolution::RunResult;
use crate::grid::{ExperimentConfig, RunAssignment};

pub const PROTOCOL_VERSION: u32 = 1;

/// Frames above this size are refused rather than allocated.
pub const MAX_FRAME_BYTES: usize = 256 * 1024 * 1024;

/// Where a worker finds the split to train on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRef {
    Path(PathBuf),
    Inline(Box<SplitDataset>),
}

impl DatasetRef {
    pub fn resolve(&self) -> Result<SplitDataset> {
        match self {
            DatasetRef::Path(p) => SplitDataset::load(p),
            DatasetRef::Inline(d) => Ok((**d).clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job_id: String,
    pub config: ExperimentConfig,
    pub assignment: RunAssignment,
    pub dataset: DatasetRef,
    pub protocol_version: u32,
}

impl JobSpec {
    pub fn new(
        job_id: impl Into<String>,
        config: ExperimentConfig,
        assignment: RunAssignment,
        dataset: DatasetRef,
    ) -> Self {
        JobSpec {
            job_id: job_id.into(),
            config,
            assignment,
            dataset,
            protocol_version: PROTOCOL_VERSION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.assignment.runs.is_empty() {
            return Err(Error::precondition(format!("job {} has no runs", self.job_id)));
        }
        self.config.params.validate()
    }
}

/// One finished run as it appears on the wire and in result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub config: String,
    pub run_index: usize,
    pub seed: u64,
    pub train_ccr: f64,
    pub test_ccr: f64,
    pub connections: usize,
    pub topology: String,
    pub seconds: f64,
}

impl RunRecord {
    pub fn from_run(config: &ExperimentConfig, run_index: usize, run: &RunResult) -> Self {
        RunRecord {
            dataset: config.dataset.clone(),
            config: config.index.to_string(),
            run_index,
            seed: run.seed,
            train_ccr: run.train_ccr,
            test_ccr: run.test_ccr,
            connections: run.connections,
            topology: run.topology.clone(),
            seconds: run.seconds,
        }
    }

    /// The record with timing removed, for comparisons across executions.
    pub fn outcome(&self) -> (String, String, usize, u64, u64, u64, usize, String) {
        (
            self.dataset.clone(),
            self.config.clone(),
            self.run_index,
            self.seed,
            self.train_ccr.to_bits(),
            self.test_ccr.to_bits(),
            self.connections,
            self.topology.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    Hello {
        version: u32,
        worker_id: String,
    },
    Job(JobSpec),
    Result {
        job_id: String,
        run: RunRecord,
    },
    Done {
        job_id: String,
        worker_id: String,
        wall_seconds: f64,
    },
    Error {
        job_id: Option<String>,
        message: String,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::Job(_) => "JOB",
            Message::Result { .. } => "RESULT",
            Message::Done { .. } => "DONE",
            Message::Error { .. } => "ERROR",
        }
    }
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<()> {
    let body = serde_json::to_vec(msg)?;
    writeln!(w, "{}", body.len())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` means the peer closed cleanly between frames.
pub fn read_message<R: BufRead>(r: &mut R) -> Result<Option<Message>> {
    let mut header = Vec::new();
    let n = Read::take(&mut *r, 32).read_until(b'\n', &mut header)?;
    if n == 0 {
        return Ok(None);
    }
    if header.last() != Some(&b'\n') {
        return Err(Error::Protocol(
            "frame header is not a newline-terminated length".into(),
        ));
    }
    header.pop();
    let len: usize = std::str::from_utf8(&header)
        .ok()
        .filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Protocol(format!("bad frame length {:?}", String::from_utf8_lossy(&header))))?;
    if len > MAX_FRAME_BYTES {
        return Err(Error::Protocol(format!("frame of {len} bytes exceeds the limit")));
    }
    let mut body = vec![0; len];
    r.read_exact(&mut body)
        .map_err(|e| Error::Protocol(format!("truncated frame: {e}")))?;
    serde_json::from_slice(&body)
        .map(Some)
        .map_err(|e| Error::Protocol(format!("malformed message: {e}")))
}

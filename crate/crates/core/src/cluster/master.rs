use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::protocol::{read_message, write_message, JobSpec, Message, RunRecord, PROTOCOL_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DispatchOptions {
    pub connect_timeout: Duration,
    /// Per-read limit while waiting for RESULT frames; `None` waits forever.
    pub read_timeout: Option<Duration>,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        DispatchOptions {
            connect_timeout: Duration::from_secs(5),
            read_timeout: None,
        }
    }
}

/// What one worker reported for its job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub job_id: String,
    pub worker_id: String,
    pub runs: Vec<RunRecord>,
    pub worker_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub job_id: String,
    pub endpoint: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchReport {
    pub jobs: Vec<JobResult>,
    pub failures: Vec<JobFailure>,
    /// From the first JOB sent to the last DONE received.
    pub wall_seconds: f64,
}

impl DispatchReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// All runs of the successful jobs, ordered by run index.
    pub fn runs(&self) -> Vec<RunRecord> {
        let mut runs: Vec<RunRecord> = self.jobs.iter().flat_map(|j| j.runs.iter().cloned()).collect();
        runs.sort_by_key(|r| r.run_index);
        runs
    }
}

struct Timed {
    sent: Instant,
    done: Instant,
    result: JobResult,
}

fn connect(endpoint: &str, timeout: Duration) -> Result<TcpStream> {
    let addrs: Vec<_> = endpoint
        .to_socket_addrs()
        .map_err(|e| Error::Worker {
            endpoint: endpoint.into(),
            message: format!("cannot resolve: {e}"),
        })?
        .collect();
    let mut last = None;
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Worker {
        endpoint: endpoint.into(),
        message: match last {
            Some(e) => format!("connect failed: {e}"),
            None => "no addresses".into(),
        },
    })
}

fn run_job(endpoint: &str, job: &JobSpec, options: &DispatchOptions) -> Result<Timed> {
    let worker_err = |message: String| Error::Worker {
        endpoint: endpoint.into(),
        message,
    };
    let stream = connect(endpoint, options.connect_timeout)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(options.connect_timeout))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream.try_clone()?);

    let worker_id = match read_message(&mut reader)? {
        Some(Message::Hello { version, worker_id }) if version == PROTOCOL_VERSION => worker_id,
        Some(Message::Hello { version, .. }) => {
            return Err(Error::Protocol(format!(
                "{endpoint} speaks protocol {version}, master speaks {PROTOCOL_VERSION}"
            )))
        }
        Some(other) => return Err(Error::Protocol(format!("{endpoint} opened with {}", other.kind()))),
        None => return Err(worker_err("closed before greeting".into())),
    };
    stream.set_read_timeout(options.read_timeout)?;

    let sent = Instant::now();
    write_message(&mut writer, &Message::Job(job.clone()))?;
    let mut runs = Vec::with_capacity(job.assignment.runs.len());
    loop {
        match read_message(&mut reader)? {
            Some(Message::Result { job_id, run }) if job_id == job.job_id => runs.push(run),
            Some(Message::Done {
                job_id,
                worker_id: done_by,
                wall_seconds,
            }) if job_id == job.job_id => {
                let done = Instant::now();
                if runs.len() != job.assignment.runs.len() {
                    return Err(Error::Protocol(format!(
                        "{endpoint} finished job {job_id} with {} of {} results",
                        runs.len(),
                        job.assignment.runs.len()
                    )));
                }
                return Ok(Timed {
                    sent,
                    done,
                    result: JobResult {
                        job_id,
                        worker_id: if done_by.is_empty() { worker_id } else { done_by },
                        runs,
                        worker_seconds: wall_seconds,
                    },
                });
            }
            Some(Message::Error { message, .. }) => return Err(worker_err(message)),
            Some(other) => return Err(Error::Protocol(format!("unexpected {} from {endpoint}", other.kind()))),
            None => return Err(worker_err(format!("connection closed after {} results", runs.len()))),
        }
    }
}

/// Sends `jobs[i]` to `endpoints[i]`, all concurrently, and gathers the
/// results. Failed jobs are listed, never dropped silently; nothing is
/// retried.
pub fn dispatch(endpoints: &[String], jobs: &[JobSpec], options: &DispatchOptions) -> Result<DispatchReport> {
    if jobs.is_empty() {
        return Err(Error::precondition("nothing to dispatch"));
    }
    if endpoints.len() < jobs.len() {
        return Err(Error::precondition(format!(
            "{} jobs but only {} worker endpoints",
            jobs.len(),
            endpoints.len()
        )));
    }
    for job in jobs {
        job.validate()?;
    }
    let outcomes: Vec<(usize, Result<Timed>)> = thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .zip(endpoints)
            .enumerate()
            .map(|(i, (job, ep))| (i, s.spawn(move || run_job(ep, job, options))))
            .collect();
        handles
            .into_iter()
            .map(|(i, h)| {
                let r = h
                    .join()
                    .unwrap_or_else(|_| Err(Error::Protocol("dispatch thread panicked".into())));
                (i, r)
            })
            .collect()
    });

    let mut first_sent: Option<Instant> = None;
    let mut last_done: Option<Instant> = None;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        match outcome {
            Ok(t) => {
                first_sent = Some(first_sent.map_or(t.sent, |f| f.min(t.sent)));
                last_done = Some(last_done.map_or(t.done, |l| l.max(t.done)));
                results.push(t.result);
            }
            Err(e) => failures.push(JobFailure {
                job_id: jobs[i].job_id.clone(),
                endpoint: endpoints[i].clone(),
                message: e.to_string(),
            }),
        }
    }
    let wall_seconds = match (first_sent, last_done) {
        (Some(a), Some(b)) => b.duration_since(a).as_secs_f64(),
        _ => 0.0,
    };
    Ok(DispatchReport {
        jobs: results,
        failures,
        wall_seconds,
    })
}

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};
use std::time::Instant;

use super::protocol::{read_message, write_message, JobSpec, Message, RunRecord, PROTOCOL_VERSION};
use crate::error::{Error, Result};
use crate::evolution::run_ea;

#[derive(Debug, Clone, Default)]
pub struct WorkerOptions {
    /// Defaults to the listening address.
    pub worker_id: Option<String>,
    /// Stop after this many connections; `None` serves forever.
    pub max_connections: Option<usize>,
}

/// Accepts connections one at a time and executes the jobs they carry.
///
/// On connect the worker greets with HELLO. Each JOB is executed run by run
/// in assignment order, with a RESULT after every run and a DONE at the
/// end. A malformed frame gets an ERROR and the connection is closed; a
/// version mismatch is refused before any run starts.
pub fn serve_worker(listener: TcpListener, options: WorkerOptions) -> Result<()> {
    let worker_id = match options.worker_id {
        Some(id) => id,
        None => listener.local_addr()?.to_string(),
    };
    let mut served = 0;
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                eprintln!("worker {worker_id}: accept failed: {e}");
                continue;
            }
        };
        if let Err(e) = handle_connection(stream, &worker_id) {
            eprintln!("worker {worker_id}: connection ended: {e}");
        }
        served += 1;
        if options.max_connections.is_some_and(|m| served >= m) {
            break;
        }
    }
    Ok(())
}

fn handle_connection(stream: TcpStream, worker_id: &str) -> Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    write_message(
        &mut writer,
        &Message::Hello {
            version: PROTOCOL_VERSION,
            worker_id: worker_id.to_string(),
        },
    )?;
    loop {
        let msg = match read_message(&mut reader) {
            Ok(Some(m)) => m,
            Ok(None) => return Ok(()),
            Err(e) => {
                let _ = write_message(
                    &mut writer,
                    &Message::Error {
                        job_id: None,
                        message: e.to_string(),
                    },
                );
                return Err(e);
            }
        };
        match msg {
            Message::Job(spec) => {
                if spec.protocol_version != PROTOCOL_VERSION {
                    let message = format!(
                        "protocol version {} not supported (worker speaks {PROTOCOL_VERSION})",
                        spec.protocol_version
                    );
                    write_message(
                        &mut writer,
                        &Message::Error {
                            job_id: Some(spec.job_id),
                            message: message.clone(),
                        },
                    )?;
                    return Err(Error::Protocol(message));
                }
                execute_job(&spec, worker_id, &mut writer)?;
            }
            Message::Hello { .. } => {}
            other => {
                let message = format!("unexpected {} message", other.kind());
                write_message(
                    &mut writer,
                    &Message::Error {
                        job_id: None,
                        message: message.clone(),
                    },
                )?;
                return Err(Error::Protocol(message));
            }
        }
    }
}

fn execute_job(spec: &JobSpec, worker_id: &str, writer: &mut BufWriter<TcpStream>) -> Result<()> {
    let start = Instant::now();
    let fail = |writer: &mut BufWriter<TcpStream>, e: Error| {
        write_message(
            writer,
            &Message::Error {
                job_id: Some(spec.job_id.clone()),
                message: e.to_string(),
            },
        )
    };
    if let Err(e) = spec.validate() {
        return fail(writer, e);
    }
    let data = match spec.dataset.resolve() {
        Ok(d) => d,
        Err(e) => return fail(writer, e),
    };
    for &(run_index, seed) in &spec.assignment.runs {
        match run_ea(&spec.config.params, &data, seed) {
            Ok(run) => write_message(
                writer,
                &Message::Result {
                    job_id: spec.job_id.clone(),
                    run: RunRecord::from_run(&spec.config, run_index, &run),
                },
            )?,
            Err(e) => return fail(writer, e),
        }
    }
    write_message(
        writer,
        &Message::Done {
            job_id: spec.job_id.clone(),
            worker_id: worker_id.to_string(),
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    )
}

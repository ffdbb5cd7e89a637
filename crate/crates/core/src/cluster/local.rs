use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, ChildStdout, Command, Stdio};

use crate::error::{Error, Result};

/// First stdout line of a worker process: `LISTENING_PREFIX <host:port>`.
pub const LISTENING_PREFIX: &str = "punn worker listening on";

/// Worker subprocesses on this host, emulating cluster nodes. They are
/// killed when the value is dropped.
pub struct LocalCluster {
    workers: Vec<(Child, BufReader<ChildStdout>)>,
    endpoints: Vec<String>,
}

impl LocalCluster {
    /// Starts `count` workers with `<binary> worker --listen 127.0.0.1:0
    /// --threads 1 <extra_args>` and waits for each to report its port.
    pub fn spawn(binary: &Path, count: usize, extra_args: &[String]) -> Result<Self> {
        let mut cluster = LocalCluster {
            workers: Vec::with_capacity(count),
            endpoints: Vec::with_capacity(count),
        };
        for i in 0..count {
            let mut child = Command::new(binary)
                .args(["worker", "--listen", "127.0.0.1:0", "--threads", "1", "--id"])
                .arg(format!("local-{i}"))
                .args(extra_args)
                .stdin(Stdio::null())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| Error::precondition(format!("cannot start worker {}: {e}", binary.display())))?;
            let mut out = BufReader::new(child.stdout.take().expect("piped stdout"));
            let mut line = String::new();
            out.read_line(&mut line)?;
            let endpoint = line
                .trim()
                .strip_prefix(LISTENING_PREFIX)
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty());
            cluster.workers.push((child, out));
            match endpoint {
                Some(ep) => cluster.endpoints.push(ep),
                None => {
                    return Err(Error::Worker {
                        endpoint: format!("local-{i}"),
                        message: format!("did not announce an endpoint (got {:?})", line.trim()),
                    })
                }
            }
        }
        Ok(cluster)
    }

    pub fn endpoints(&self) -> &[String] {
        &self.endpoints
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    /// Kills worker `i`, leaving its endpoint dead.
    pub fn kill(&mut self, i: usize) -> Result<()> {
        let (child, _) = &mut self.workers[i];
        child.kill()?;
        child.wait()?;
        Ok(())
    }
}

impl Drop for LocalCluster {
    fn drop(&mut self) {
        for (child, _) in &mut self.workers {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

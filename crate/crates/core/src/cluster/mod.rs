//! Master/worker execution over TCP, with wall-clock benchmarking of how
//! runs split across nodes.

mod bench;
mod local;
mod master;
pub mod protocol;
mod worker;

pub use bench::{bench, efficiency, speedup, truncate_decimals, BenchReport, BenchRow};
pub use local::{LocalCluster, LISTENING_PREFIX};
pub use master::{dispatch, DispatchOptions, DispatchReport, JobFailure, JobResult};
pub use protocol::{DatasetRef, JobSpec, Message, RunRecord, PROTOCOL_VERSION};
pub use worker::{serve_worker, WorkerOptions};

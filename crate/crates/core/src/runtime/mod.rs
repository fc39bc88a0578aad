//! The split / process* / merge runtime.
//!
//! The partitioned stream (the pattern's rightmost leaf) is split across `m`
//! workers by a [`Dispatcher`]; every other leaf stream is replicated to all
//! workers. Each worker evaluates the pattern anchored at the partitioned
//! events it receives, so every match is produced by exactly one worker.

mod buffer;
mod host;
mod sim;
mod split;
mod threaded;
mod worker;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use buffer::ReplicaBuffer;
pub use host::HostState;
pub use sim::{
    run_virtual, Completion, Dispatcher, FixedServiceTime, RunOutcome, ServiceTimer, StaticDispatcher, TraceAction,
    TraceRecord,
};
pub use split::{merge, place, replicate, split, RedirectModel, RoutedEvent, SplitDecision};
pub use threaded::run_threaded;
pub use worker::{Evaluation, PatternWorker, WorkSize};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("invalid runtime configuration: {0}")]
    InvalidConfig(String),
    #[error("input stream is not sorted by timestamp at position {0}")]
    UnsortedInput(usize),
    #[error("worker thread panicked")]
    WorkerPanicked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    /// Single-threaded discrete-event simulation; seed-deterministic.
    Virtual,
    /// One OS thread per worker, real clock.
    WallClock,
}

impl FromStr for ExecutionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "virtual" => Ok(ExecutionMode::Virtual),
            "wallclock" | "wall-clock" => Ok(ExecutionMode::WallClock),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecutionMode::Virtual => "virtual",
            ExecutionMode::WallClock => "wallclock",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub m: usize,
    /// Queued plus in-service events a worker holds before the splitter
    /// redirects away from it.
    pub queue_capacity: usize,
    pub mode: ExecutionMode,
    pub redirect: RedirectModel,
    /// Materialize composite events (otherwise matches are only counted).
    pub collect_outputs: bool,
    /// Record the enqueue/dequeue/match/redirect audit log.
    pub trace: bool,
    /// Sample count of the per-host sliding accumulators.
    pub stats_window: usize,
    /// Service rate assumed for a host before it has served anything.
    pub prior_service_rate: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            m: 2,
            queue_capacity: 64,
            mode: ExecutionMode::Virtual,
            redirect: RedirectModel::default(),
            collect_outputs: true,
            trace: false,
            stats_window: 500,
            prior_service_rate: 100.0,
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.m < 1 {
            return Err(RuntimeError::InvalidConfig("m must be at least 1".into()));
        }
        if self.queue_capacity < 1 {
            return Err(RuntimeError::InvalidConfig("queue_capacity must be at least 1".into()));
        }
        if self.stats_window < 2 {
            return Err(RuntimeError::InvalidConfig("stats_window must be at least 2".into()));
        }
        if !(self.prior_service_rate > 0.0) {
            return Err(RuntimeError::InvalidConfig("prior_service_rate must be positive".into()));
        }
        Ok(())
    }
}

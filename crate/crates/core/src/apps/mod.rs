//! Adaptive policy selection: sizing, queueing estimates, the accuracy /
//! latency trade-off and the online dispatcher that ties them together.

mod controller;
mod estimation;
mod histogram;
mod queueing;
mod selection;
mod sizing;

use thiserror::Error;

pub use controller::{AdaptationRecord, AppsConfig, AppsDispatcher};
pub use estimation::{batches_per_epoch, estimation_mse, tradeoff_solve, TimingStats, TradeoffSolution};
pub use histogram::{AssignHistogram, LatencyHistogram};
pub use queueing::{kingman_wait, multiserver_wait};
pub use selection::{estimate_policy_wait, policy_expected_wait, select_policy, PolicyDecision, PolicyEstimate};
pub use sizing::{batch_size, compute_parallel_degree, SizingParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AppsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("utilization {rho} is at or above 1; the queue is unstable")]
    Saturated { rho: f64 },
}

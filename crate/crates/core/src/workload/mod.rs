//! Synthetic workloads, the service-time model and the experiment runner.

mod config;
mod generate;
mod report;
mod scenario;
mod service;

use thiserror::Error;

pub use config::{load_scenario, AppsSection, RedirectSection, ScenarioFile, SweepSection};
pub use generate::{generate_streams, InterArrival, RateProfile, WorkloadSpec};
pub use report::{write_report_csv, write_trace_csv, summary_table, REPORT_HEADER};
pub use scenario::{calibrate, run_scenario, sweep, Calibration, ExperimentReport, Method, Scenario, SweepParam};
pub use service::{ServiceDistribution, ServiceModel};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error(transparent)]
    Event(#[from] crate::event::EventError),
    #[error(transparent)]
    Runtime(#[from] crate::runtime::RuntimeError),
    #[error(transparent)]
    Apps(#[from] crate::apps::AppsError),
    #[error(transparent)]
    Parse(#[from] crate::query::ParseError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
}

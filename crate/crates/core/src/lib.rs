//! Complex event processing over a split / process / merge runtime with
//! adaptive selection of the event-splitting policy.
//!
//! - [`event`]: primitive and composite events, replay file format.
//! - [`query`]: query language and the reference (single operator) matcher.
//! - [`policy`]: round-robin, join-shortest-queue and least-loaded splitting.
//! - [`runtime`]: the parallel runtime, in virtual time or on threads.
//! - [`apps`]: sizing, queueing estimators and the adaptive policy selector.
//! - [`workload`]: synthetic workloads, scenarios and sweeps.

pub mod apps;
pub mod event;
pub mod policy;
pub mod query;
pub mod runtime;
pub mod stats;
pub mod workload;

//! Scenario files (TOML).
//!
//! ```toml
//! query = "PATTERN SEQ(E1, E2) WHERE [Id] WITHIN 1 s"
//! methods = ["rr", "jsq", "llsf", "apps"]
//! m = 2
//! queue_capacity = 8
//!
//! [workload]
//! rate = { constant = 100.0 }
//! duration_s = 120.0
//! seed = 3
//!
//! [service]
//! base_us = 2000.0
//! host_speed = [2.0, 1.0]
//!
//! [apps]
//! tau = 1000
//!
//! [sweep]
//! param = "rate"
//! values = [100.0, 200.0, 300.0, 400.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::query::parse_query;
use crate::runtime::{ExecutionMode, RedirectModel, RuntimeConfig};

use super::generate::WorkloadSpec;
use super::scenario::{Method, Scenario, SweepParam};
use super::service::ServiceModel;
use super::WorkloadError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RedirectSection {
    pub base_us: i64,
    pub per_byte_us: f64,
}

impl Default for RedirectSection {
    fn default() -> Self {
        let d = RedirectModel::default();
        Self {
            base_us: d.base_us,
            per_byte_us: d.per_byte_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppsSection {
    pub delta: f64,
    pub beta: Option<f64>,
    pub tau: usize,
    pub decay: f64,
    pub warmup: bool,
    pub shadow: bool,
    pub estimate_cost_us: f64,
    pub mu: Option<f64>,
}

impl Default for AppsSection {
    fn default() -> Self {
        Self {
            delta: 0.9,
            beta: None,
            tau: 1000,
            decay: 0.8,
            warmup: true,
            shadow: true,
            estimate_cost_us: 50.0,
            mu: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub query: String,
    pub methods: Vec<String>,
    pub m: usize,
    pub queue_capacity: usize,
    pub mode: String,
    pub stats_window: usize,
    pub workload: WorkloadSpec,
    pub service: ServiceModel,
    pub redirect: RedirectSection,
    pub apps: AppsSection,
    pub sweep: Option<SweepSection>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            query: "PATTERN SEQ(E1, E2) WHERE [Id] WITHIN 1 s".into(),
            methods: vec!["rr".into(), "jsq".into(), "llsf".into(), "apps".into()],
            m: 2,
            queue_capacity: 8,
            mode: "virtual".into(),
            stats_window: 500,
            workload: WorkloadSpec::default(),
            service: ServiceModel::default(),
            redirect: RedirectSection::default(),
            apps: AppsSection::default(),
            sweep: None,
        }
    }
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, WorkloadError> {
        toml::from_str(text).map_err(|e| WorkloadError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn methods(&self) -> Result<Vec<Method>, WorkloadError> {
        self.methods
            .iter()
            .map(|m| m.parse().map_err(WorkloadError::Config))
            .collect()
    }

    pub fn sweep(&self) -> Result<Option<(SweepParam, Vec<f64>)>, WorkloadError> {
        self.sweep
            .as_ref()
            .map(|s| Ok((s.param.parse().map_err(WorkloadError::Config)?, s.values.clone())))
            .transpose()
    }

    pub fn to_scenario(&self) -> Result<Scenario, WorkloadError> {
        let query = parse_query(&self.query)?;
        let mode: ExecutionMode = self.mode.parse().map_err(WorkloadError::Config)?;
        let runtime = RuntimeConfig {
            m: self.m,
            queue_capacity: self.queue_capacity,
            mode,
            redirect: RedirectModel {
                base_us: self.redirect.base_us,
                per_byte_us: self.redirect.per_byte_us,
            },
            collect_outputs: false,
            trace: false,
            stats_window: self.stats_window,
            ..RuntimeConfig::default()
        };
        let mut sc = Scenario::new(query, self.workload.clone(), self.service.clone(), runtime);
        let a = &self.apps;
        sc.delta = a.delta;
        sc.beta = a.beta;
        sc.tau = a.tau;
        sc.decay = a.decay;
        sc.warmup = a.warmup;
        sc.shadow = a.shadow;
        sc.estimate_cost_us = a.estimate_cost_us;
        sc.mu = a.mu;
        Ok(sc)
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, WorkloadError> {
    ScenarioFile::from_toml(&std::fs::read_to_string(path)?)
}

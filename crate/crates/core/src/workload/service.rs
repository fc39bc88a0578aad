use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::event::{Micros, PrimitiveEvent};
use crate::runtime::{ServiceTimer, WorkSize};

use super::WorkloadError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceDistribution {
    Deterministic,
    Exponential,
}

/// Service time of a partitioned event:
/// `(base + per_buffer * buffered + per_candidate * candidates) * speed[host]`,
/// times a unit-mean noise factor, floored at `1 / capacity_limit`.
///
/// The noise for an event depends only on the seed and the event id, so
/// runs that differ only in the splitting method see the same draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceModel {
    pub base_us: f64,
    pub per_buffer_us: f64,
    pub per_candidate_us: f64,
    pub distribution: ServiceDistribution,
    /// Highest sustainable events/s per host.
    pub capacity_limit: f64,
    /// Per-host slowdown factors; missing hosts run at 1.0.
    pub host_speed: Vec<f64>,
    pub seed: u64,
}

impl Default for ServiceModel {
    fn default() -> Self {
        Self {
            base_us: 2_000.0,
            per_buffer_us: 20.0,
            per_candidate_us: 400.0,
            distribution: ServiceDistribution::Exponential,
            capacity_limit: 5_000.0,
            host_speed: Vec::new(),
            seed: 7,
        }
    }
}

impl ServiceModel {
    /// Fixed service time on every host.
    pub fn constant(us: f64, distribution: ServiceDistribution) -> Self {
        Self {
            base_us: us,
            per_buffer_us: 0.0,
            per_candidate_us: 0.0,
            distribution,
            capacity_limit: f64::INFINITY,
            host_speed: Vec::new(),
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let costs = [self.base_us, self.per_buffer_us, self.per_candidate_us];
        if costs.iter().any(|c| !(*c >= 0.0)) || self.base_us <= 0.0 {
            return Err(WorkloadError::Invalid("service costs must be positive".into()));
        }
        if !(self.capacity_limit > 0.0) {
            return Err(WorkloadError::Invalid("capacity limit must be positive".into()));
        }
        if self.host_speed.iter().any(|s| !(*s > 0.0)) {
            return Err(WorkloadError::Invalid("host speed factors must be positive".into()));
        }
        Ok(())
    }

    pub fn speed(&self, host: usize) -> f64 {
        self.host_speed.get(host).copied().unwrap_or(1.0)
    }

    /// Mean service time before noise, µs.
    pub fn nominal_us(&self, host: usize, work: WorkSize) -> f64 {
        (self.base_us + self.per_buffer_us * work.buffer_len as f64 + self.per_candidate_us * work.candidates as f64)
            * self.speed(host)
    }

    fn noise(&self, event_id: u64) -> f64 {
        match self.distribution {
            ServiceDistribution::Deterministic => 1.0,
            ServiceDistribution::Exponential => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ event_id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                Exp1.sample(&mut rng)
            }
        }
    }

    pub fn sample_us(&self, host: usize, event_id: u64, work: WorkSize) -> Micros {
        let floor = 1e6 / self.capacity_limit;
        let t = (self.nominal_us(host, work) * self.noise(event_id)).max(floor);
        (t.round() as Micros).max(1)
    }
}

impl ServiceTimer for ServiceModel {
    fn service_time(&mut self, host: usize, trigger: &PrimitiveEvent, work: WorkSize) -> Micros {
        self.sample_us(host, trigger.id, work)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_is_exact_and_scaled() {
        let mut m = ServiceModel::constant(1_000.0, ServiceDistribution::Deterministic);
        m.host_speed = vec![2.0];
        assert_eq!(m.sample_us(0, 5, WorkSize::default()), 2_000);
        assert_eq!(m.sample_us(1, 5, WorkSize::default()), 1_000);
    }

    #[test]
    fn grows_with_window_content() {
        let m = ServiceModel {
            distribution: ServiceDistribution::Deterministic,
            ..ServiceModel::default()
        };
        let small = m.sample_us(0, 1, WorkSize { buffer_len: 10, candidates: 1 });
        let large = m.sample_us(0, 1, WorkSize { buffer_len: 1_000, candidates: 1 });
        assert!(large > small);
    }

    #[test]
    fn noise_is_paired_by_event_and_unit_mean() {
        let m = ServiceModel::constant(1_000.0, ServiceDistribution::Exponential);
        assert_eq!(m.sample_us(0, 42, WorkSize::default()), m.sample_us(1, 42, WorkSize::default()));
        let mean = (0..20_000).map(|i| m.sample_us(0, i, WorkSize::default()) as f64).sum::<f64>() / 20_000.0;
        assert!((mean / 1_000.0 - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn capacity_floor() {
        let m = ServiceModel {
            capacity_limit: 100.0,
            ..ServiceModel::constant(10.0, ServiceDistribution::Deterministic)
        };
        assert_eq!(m.sample_us(0, 0, WorkSize::default()), 10_000);
    }
}

//! Assignment and redirect statistics per policy and host.

use crate::event::Micros;
use crate::policy::PolicyKind;

/// Fixed-width histogram of redirect latencies. Bucket `r` is centred on
/// `r * width`; latencies past the last bucket land in it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyHistogram {
    width_us: f64,
    counts: Vec<f64>,
}

impl LatencyHistogram {
    pub fn new(buckets: usize, width_us: f64) -> Self {
        assert!(buckets >= 1 && width_us > 0.0, "histogram needs a bucket and positive width");
        Self {
            width_us,
            counts: vec![0.0; buckets],
        }
    }

    pub fn record(&mut self, latency: Micros) {
        let r = (latency.max(0) as f64 / self.width_us).round() as usize;
        let r = r.min(self.counts.len() - 1);
        self.counts[r] += 1.0;
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn decay(&mut self, factor: f64) {
        self.counts.iter_mut().for_each(|c| *c *= factor);
    }

    /// Non-empty buckets as `(midpoint µs, relative frequency)`.
    pub fn buckets(&self) -> Vec<(f64, f64)> {
        let total = self.total();
        if total <= 0.0 {
            return Vec::new();
        }
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(r, &c)| (r as f64 * self.width_us, c / total))
            .collect()
    }

    /// `Σ x_r f(x_r)` in µs; zero when nothing was recorded.
    pub fn expected_redirect_time(&self) -> f64 {
        self.buckets().iter().map(|(x, f)| x * f).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PolicyCounts {
    assigned: Vec<f64>,
    redirected: Vec<f64>,
}

/// Empirical `P^H` (first-choice host) and `P^R` (redirect target)
/// probabilities per policy, plus redirect latencies per host.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignHistogram {
    m: usize,
    counts: Vec<PolicyCounts>,
    latency: Vec<LatencyHistogram>,
}

fn slot(policy: PolicyKind) -> usize {
    PolicyKind::ALL.iter().position(|&p| p == policy).expect("known policy")
}

impl AssignHistogram {
    pub fn new(m: usize, buckets: usize, bucket_width_us: f64) -> Self {
        assert!(m >= 1, "at least one host");
        Self {
            m,
            counts: PolicyKind::ALL
                .iter()
                .map(|_| PolicyCounts {
                    assigned: vec![0.0; m],
                    redirected: vec![0.0; m],
                })
                .collect(),
            latency: (0..m).map(|_| LatencyHistogram::new(buckets, bucket_width_us)).collect(),
        }
    }

    pub fn hosts(&self) -> usize {
        self.m
    }

    /// Records one placement: `host` is the policy's first choice; when the
    /// event was redirected, `redirect` holds the final host and latency.
    pub fn record_assignment(&mut self, policy: PolicyKind, host: usize, redirect: Option<(usize, Micros)>) {
        assert!(host < self.m, "host index out of range");
        let c = &mut self.counts[slot(policy)];
        c.assigned[host] += 1.0;
        if let Some((to, latency)) = redirect {
            assert!(to < self.m, "host index out of range");
            c.redirected[to] += 1.0;
            self.latency[to].record(latency);
        }
    }

    pub fn observations(&self, policy: PolicyKind) -> f64 {
        self.counts[slot(policy)].assigned.iter().sum()
    }

    /// `(P^H_i, P^R_i)` per host, or `None` without observations.
    pub fn probabilities(&self, policy: PolicyKind) -> Option<(Vec<f64>, Vec<f64>)> {
        let total = self.observations(policy);
        if total <= 0.0 {
            return None;
        }
        let c = &self.counts[slot(policy)];
        Some((
            c.assigned.iter().map(|a| a / total).collect(),
            c.redirected.iter().map(|r| r / total).collect(),
        ))
    }

    /// `E[W^R_i]` in µs.
    pub fn expected_redirect_time(&self, host: usize) -> f64 {
        self.latency[host].expected_redirect_time()
    }

    pub fn latency(&self, host: usize) -> &LatencyHistogram {
        &self.latency[host]
    }

    /// Exponential forgetting of one policy's counts.
    pub fn decay(&mut self, policy: PolicyKind, factor: f64) {
        let c = &mut self.counts[slot(policy)];
        c.assigned.iter_mut().chain(c.redirected.iter_mut()).for_each(|x| *x *= factor);
    }

    pub fn decay_latencies(&mut self, factor: f64) {
        self.latency.iter_mut().for_each(|h| h.decay(factor));
    }
}

use crate::event::Micros;
use crate::stats::WindowedStats;

/// Per-worker runtime statistics visible to the splitter.
#[derive(Debug, Clone)]
pub struct HostState {
    pub host_id: usize,
    /// Queued plus in-service partitioned events.
    pub queue_len: usize,
    /// Bytes of queued events plus the replica buffer (partial-match state).
    pub mem_load: u64,
    /// Estimated service rate µ_i in events per second.
    pub service_rate: f64,
    pub busy: bool,
    pub served_count: u64,
    /// Inter-arrival times of partitioned events at this host, in µs.
    pub inter_arrival_stats: WindowedStats,
    /// Service times at this host, in µs.
    pub service_stats: WindowedStats,
    last_arrival: Option<Micros>,
}

impl HostState {
    /// `prior_rate` seeds `service_rate` until service samples exist;
    /// `window` is the accumulator length in samples.
    pub fn new(host_id: usize, prior_rate: f64, window: usize) -> Self {
        assert!(prior_rate > 0.0, "service rate must be positive");
        Self {
            host_id,
            queue_len: 0,
            mem_load: 0,
            service_rate: prior_rate,
            busy: false,
            served_count: 0,
            inter_arrival_stats: WindowedStats::new(window),
            service_stats: WindowedStats::new(window),
            last_arrival: None,
        }
    }

    pub fn record_arrival(&mut self, now: Micros) {
        if let Some(prev) = self.last_arrival {
            self.inter_arrival_stats.push((now - prev) as f64);
        }
        self.last_arrival = Some(now);
    }

    pub fn record_service(&mut self, duration: Micros) {
        self.served_count += 1;
        self.service_stats.push(duration.max(0) as f64);
        if let Some(mean) = self.service_stats.mean() {
            if mean > 0.0 {
                self.service_rate = 1e6 / mean;
            }
        }
    }

    /// Observed arrival rate in events per second.
    pub fn arrival_rate(&self) -> Option<f64> {
        let mean = self.inter_arrival_stats.mean()?;
        (mean > 0.0).then(|| 1e6 / mean)
    }

    /// ρ_i = λ_i / µ_i from the windowed accumulators.
    pub fn utilization(&self) -> Option<f64> {
        Some(self.arrival_rate()? / self.service_rate)
    }

    /// C²_ia; 1.0 (Poisson) until enough samples exist.
    pub fn c2_arrival(&self) -> f64 {
        self.inter_arrival_stats.scv().unwrap_or(1.0)
    }

    /// C²_is; 1.0 until enough samples exist.
    pub fn c2_service(&self) -> f64 {
        self.service_stats.scv().unwrap_or(1.0)
    }
}

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::apps::{batch_size, AdaptationRecord, AppsConfig, AppsDispatcher, SizingParams};
use crate::event::{secs_to_micros, PrimitiveEvent};
use crate::policy::PolicyKind;
use crate::query::{format_window, PatternQuery};
use crate::runtime::{
    run_threaded, run_virtual, Completion, Dispatcher, ExecutionMode, RunOutcome, RuntimeConfig, StaticDispatcher,
};
use crate::stats::quantile;

use super::generate::{generate_streams, RateProfile, WorkloadSpec};
use super::service::ServiceModel;
use super::WorkloadError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Static(PolicyKind),
    Apps,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Static(PolicyKind::RoundRobin),
        Method::Static(PolicyKind::ShortestQueue),
        Method::Static(PolicyKind::LeastLoaded),
        Method::Apps,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Static(k) => k.label(),
            Method::Apps => "APPS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("apps") {
            return Ok(Method::Apps);
        }
        s.parse::<PolicyKind>().map(Method::Static).map_err(|_| format!("unknown method {s:?}"))
    }
}

/// Everything needed to run one experiment cell.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub query: Arc<PatternQuery>,
    pub workload: WorkloadSpec,
    pub service: ServiceModel,
    pub runtime: RuntimeConfig,
    /// Utilization threshold used for the batch size.
    pub delta: f64,
    /// Estimation error bound; calibrated from the first epoch when unset.
    pub beta: Option<f64>,
    /// Events per adaptation epoch.
    pub tau: usize,
    /// Histogram forgetting factor per epoch.
    pub decay: f64,
    pub warmup: bool,
    pub shadow: bool,
    /// Modelled estimator cost per batch, µs.
    pub estimate_cost_us: f64,
    /// Per-host service rate; measured by [`calibrate`] when unset.
    pub mu: Option<f64>,
}

impl Scenario {
    pub fn new(query: PatternQuery, workload: WorkloadSpec, service: ServiceModel, runtime: RuntimeConfig) -> Self {
        Self {
            query: Arc::new(query),
            workload,
            service,
            runtime,
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

    pub fn with_window(&self, window_s: f64) -> Self {
        let q = &self.query;
        Self {
            query: Arc::new(PatternQuery::new(
                q.pattern.clone(),
                q.where_key.as_deref(),
                secs_to_micros(window_s),
            )),
            ..self.clone()
        }
    }

    pub fn with_rate(&self, rate: f64) -> Self {
        let mut s = self.clone();
        s.workload.rate = RateProfile::Constant(rate);
        s
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.workload.seed = seed;
        s.service.seed = seed.wrapping_mul(31).wrapping_add(7);
        s
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        self.workload.validate()?;
        self.service.validate()?;
        self.runtime.validate()?;
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(WorkloadError::Invalid("delta must lie in (0, 1]".into()));
        }
        if self.tau < 1 {
            return Err(WorkloadError::Invalid("tau must be at least 1".into()));
        }
        Ok(())
    }

    /// Mean rate of the partitioned stream over the run.
    fn mean_rate(&self) -> f64 {
        let d = self.workload.duration_s;
        match &self.workload.rate {
            RateProfile::Constant(r) => *r,
            RateProfile::Piecewise(_) if d <= 0.0 => self.workload.rate.rate_at(0.0),
            RateProfile::Piecewise(_) => {
                let steps = 1000;
                (0..steps)
                    .map(|k| self.workload.rate.rate_at(d * (k as f64 + 0.5) / steps as f64))
                    .sum::<f64>()
                    / steps as f64
            }
        }
    }
}

/// Quantities the trade-off solver and the sizing rules need, measured by
/// a round-robin pass over the scenario's stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Service rate per host, events/s.
    pub mu: f64,
    pub batch_size: usize,
    pub t_ps_batch_us: f64,
    pub t_es_batch_us: f64,
    pub t_rd_us: f64,
}

fn calibrate_on(sc: &Scenario, stream: &[PrimitiveEvent]) -> Result<Calibration, WorkloadError> {
    let cfg = RuntimeConfig {
        collect_outputs: false,
        trace: false,
        mode: ExecutionMode::Virtual,
        ..sc.runtime.clone()
    };
    let mut service = sc.service.clone();
    let out = run_virtual(
        sc.query.clone(),
        stream,
        &cfg,
        &mut service,
        &mut StaticDispatcher::new(PolicyKind::RoundRobin),
    )?;
    let n = out.completions.len();
    let mean_service = if n == 0 {
        sc.service.nominal_us(0, Default::default())
    } else {
        out.completions.iter().map(|c| c.service_time as f64).sum::<f64>() / n as f64
    };
    let mu = 1e6 / mean_service.max(1e-9);
    let partitioned = sc.query.partitioned_type();
    let sizes: Vec<f64> = stream
        .iter()
        .filter(|e| e.event_type == partitioned)
        .map(|e| e.size_bytes() as f64)
        .collect();
    let mean_size = if sizes.is_empty() { 0.0 } else { sizes.iter().sum::<f64>() / sizes.len() as f64 };
    let i = batch_size(&SizingParams::new(1.0, mu, sc.delta));
    Ok(Calibration {
        mu,
        batch_size: i,
        t_ps_batch_us: mean_service * i as f64,
        t_es_batch_us: sc.estimate_cost_us,
        t_rd_us: sc.runtime.redirect.base_us as f64 + mean_size * sc.runtime.redirect.per_byte_us,
    })
}

/// Measures the service rate and batch timings for `sc`.
pub fn calibrate(sc: &Scenario) -> Result<Calibration, WorkloadError> {
    sc.validate()?;
    let stream = generate_streams(&sc.workload)?;
    calibrate_on(sc, &stream)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: Method,
    /// Sweep cell label such as `rate=200`; empty for a single run.
    pub cell: String,
    pub seed: u64,
    pub m: usize,
    /// Partitioned events processed.
    pub events: usize,
    pub matches: u64,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    /// Processed events per second of elapsed time.
    pub throughput: f64,
    pub redirects: u64,
    pub utilization: Vec<f64>,
    /// Fraction of events placed by RR, JSQ and LLSF.
    pub policy_share: [f64; 3],
    pub trace: Vec<AdaptationRecord>,
    pub processing_ms: Vec<f64>,
}

impl ExperimentReport {
    fn from_outcome(method: Method, seed: u64, m: usize, out: &RunOutcome, trace: Vec<AdaptationRecord>) -> Self {
        let times: Vec<f64> = out
            .completions
            .iter()
            .map(|c| Completion::processing_time(c) as f64 / 1e3)
            .collect();
        let n = times.len();
        let mean = if n == 0 { 0.0 } else { times.iter().sum::<f64>() / n as f64 };
        let first = out.completions.iter().map(|c| c.arrival).min().unwrap_or(0);
        let last = out.completions.iter().map(|c| c.departure).max().unwrap_or(0);
        let span_s = (last - first) as f64 / 1e6;
        let mut share = [0.0; 3];
        for c in &out.completions {
            let k = PolicyKind::ALL.iter().position(|&p| p == c.policy).expect("known policy");
            share[k] += 1.0;
        }
        if n > 0 {
            share.iter_mut().for_each(|s| *s /= n as f64);
        }
        let end = out.end_time.max(1) as f64;
        Self {
            method,
            cell: String::new(),
            seed,
            m,
            events: n,
            matches: out.match_count,
            mean_ms: mean,
            median_ms: quantile(&times, 0.5).unwrap_or(0.0),
            p99_ms: quantile(&times, 0.99).unwrap_or(0.0),
            throughput: if span_s > 0.0 { n as f64 / span_s } else { 0.0 },
            redirects: out.redirects,
            utilization: out.busy_time.iter().map(|&b| b as f64 / end).collect(),
            policy_share: share,
            trace,
            processing_ms: times,
        }
    }
}

fn apps_dispatcher(sc: &Scenario, stream: &[PrimitiveEvent]) -> Result<AppsDispatcher, WorkloadError> {
    let mu = match sc.mu {
        Some(mu) => mu,
        None => calibrate_on(sc, stream)?.mu,
    };
    let sizing = SizingParams {
        lambda: sc.mean_rate(),
        mu,
        delta: sc.delta,
        beta: sc.beta.unwrap_or(f64::INFINITY),
        tau: sc.tau,
    };
    sizing.validate()?;
    let mut cfg = AppsConfig::new(sc.runtime.m, sizing);
    cfg.decay = sc.decay;
    cfg.warmup = sc.warmup;
    cfg.shadow = sc.shadow;
    cfg.stats_window = sc.runtime.stats_window;
    cfg.estimate_cost_us = match sc.runtime.mode {
        ExecutionMode::Virtual => Some(sc.estimate_cost_us),
        ExecutionMode::WallClock => None,
    };
    Ok(AppsDispatcher::new(cfg))
}

/// Runs the full pipeline for one method. Virtual-time runs are
/// deterministic in the scenario's seeds.
pub fn run_scenario(sc: &Scenario, method: Method) -> Result<ExperimentReport, WorkloadError> {
    sc.validate()?;
    let stream = generate_streams(&sc.workload)?;
    let m = sc.runtime.m;
    let seed = sc.workload.seed;
    let mut apps = None;
    let mut fixed = None;
    let dispatcher: &mut dyn Dispatcher = match method {
        Method::Apps => apps.insert(apps_dispatcher(sc, &stream)?),
        Method::Static(kind) => fixed.insert(StaticDispatcher::new(kind)),
    };
    let out = match sc.runtime.mode {
        ExecutionMode::Virtual => {
            let mut service = sc.service.clone();
            run_virtual(sc.query.clone(), &stream, &sc.runtime, &mut service, dispatcher)?
        }
        ExecutionMode::WallClock => run_threaded(sc.query.clone(), &stream, &sc.runtime, dispatcher, true)?,
    };
    let trace = apps.map(|a| a.trace().to_vec()).unwrap_or_default();
    Ok(ExperimentReport::from_outcome(method, seed, m, &out, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Window length in seconds.
    Window,
    /// Constant input rate in events/s per stream.
    Rate,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "window" => Ok(SweepParam::Window),
            "rate" => Ok(SweepParam::Rate),
            other => Err(format!("unknown sweep parameter {other:?}")),
        }
    }
}

/// One report per value and method. Every cell uses the base scenario's
/// seeds, so methods see identical input.
pub fn sweep(
    param: SweepParam,
    values: &[f64],
    base: &Scenario,
    methods: &[Method],
) -> Result<Vec<ExperimentReport>, WorkloadError> {
    if values.is_empty() {
        return Err(WorkloadError::Invalid("sweep needs at least one value".into()));
    }
    let mut out = Vec::with_capacity(values.len() * methods.len());
    for &v in values {
        let (sc, cell) = match param {
            SweepParam::Window => {
                let sc = base.with_window(v);
                let label = format!("window={}", format_window(sc.query.window).replace(' ', ""));
                (sc, label)
            }
            SweepParam::Rate => (base.with_rate(v), format!("rate={v}")),
        };
        for &method in methods {
            let mut r = run_scenario(&sc, method)?;
            r.cell = cell.clone();
            out.push(r);
        }
    }
    Ok(out)
}

//! The adaptive dispatcher.
//!
//! Events are counted in batches of `i` and segments of `q` batches. At
//! every segment boundary the expected wait of each candidate policy is
//! estimated and the argmin is queued; it takes effect `ℓ` segments later.
//! Every `τ` events (an epoch) the histograms decay and `(q, ℓ)` is
//! re-solved from the per-batch wait history.
//!
//! While one policy places events, the others are asked where they would
//! have placed the same event on the same host snapshot, so every candidate
//! keeps a current assignment histogram.

use std::collections::VecDeque;
use std::fmt;
use std::time::Instant;

use crate::event::{Micros, PrimitiveEvent};
use crate::policy::{PolicyKind, SplittingPolicy};
use crate::runtime::{place, split, Completion, Dispatcher, HostState, RedirectModel, SplitDecision};
use crate::stats::{quantile, WindowedStats};

use super::estimation::{batches_per_epoch, estimation_mse, tradeoff_solve, TimingStats, TradeoffSolution};
use super::histogram::AssignHistogram;
use super::queueing::multiserver_wait;
use super::selection::{estimate_policy_wait, select_policy, PolicyDecision};
use super::sizing::{batch_size, SizingParams};

#[derive(Debug, Clone, PartialEq)]
pub struct AppsConfig {
    pub m: usize,
    /// `mu` and `delta` set the batch size, `tau` the epoch length and
    /// `beta` the error bound. A non-finite `beta` is calibrated from the
    /// first epoch (90th percentile of the observed errors).
    pub sizing: SizingParams,
    /// Forgetting factor applied to the histograms once per epoch.
    pub decay: f64,
    pub buckets: usize,
    pub bucket_width_us: f64,
    /// Sample count of the arrival-rate and per-candidate accumulators.
    pub stats_window: usize,
    /// Run each candidate for one epoch before selecting.
    pub warmup: bool,
    /// Record where inactive candidates would have placed each event.
    pub shadow: bool,
    /// Estimator cost per batch in µs; `None` measures it on the wall clock.
    pub estimate_cost_us: Option<f64>,
}

impl AppsConfig {
    pub fn new(m: usize, sizing: SizingParams) -> Self {
        Self {
            m,
            sizing,
            decay: 0.8,
            buckets: 32,
            bucket_width_us: 1_000.0,
            stats_window: 500,
            warmup: true,
            shadow: true,
            estimate_cost_us: Some(50.0),
        }
    }
}

/// One row of the adaptation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationRecord {
    pub epoch: usize,
    pub candidate: PolicyKind,
    /// Seconds; `None` without observations, infinite when saturated.
    pub expected_wait: Option<f64>,
    pub chosen: PolicyKind,
    pub q: usize,
    pub lag: usize,
    pub mse: Option<f64>,
}

impl AdaptationRecord {
    pub const CSV_HEADER: &'static str = "epoch,candidate,E_W,chosen,q,l,mse";
}

impl fmt::Display for AdaptationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.9}"));
        write!(
            f,
            "{},{},{},{},{},{},{}",
            self.epoch,
            self.candidate.label(),
            opt(self.expected_wait),
            self.chosen.label(),
            self.q,
            self.lag,
            opt(self.mse)
        )
    }
}

#[derive(Debug, Clone)]
struct Gaps {
    stats: WindowedStats,
    last: Option<Micros>,
}

impl Gaps {
    fn new(window: usize) -> Self {
        Self {
            stats: WindowedStats::new(window),
            last: None,
        }
    }

    fn push(&mut self, now: Micros) -> Option<f64> {
        let gap = self.last.map(|prev| (now - prev) as f64);
        if let Some(g) = gap {
            self.stats.push(g);
        }
        self.last = Some(now);
        gap
    }
}

#[derive(Debug, Clone, Default)]
struct BatchAcc {
    gaps: Vec<f64>,
    services: Vec<f64>,
}

fn mean_scv(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return None;
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var / (mean * mean)))
}

fn slot(kind: PolicyKind) -> usize {
    PolicyKind::ALL.iter().position(|&p| p == kind).expect("known policy")
}

#[derive(Debug)]
pub struct AppsDispatcher {
    cfg: AppsConfig,
    batch: usize,
    policies: Vec<SplittingPolicy>,
    active: PolicyKind,
    hist: AssignHistogram,
    splitter_gaps: Gaps,
    last_seen: Option<u64>,
    placed: u64,
    beta: Option<f64>,
    solution: TradeoffSolution,
    current: BatchAcc,
    history: Vec<f64>,
    epoch_services: Vec<f64>,
    epoch_redirects: Vec<f64>,
    segment_index: usize,
    in_segment: usize,
    pending: VecDeque<(usize, PolicyDecision)>,
    decisions: Vec<PolicyDecision>,
    trace: Vec<AdaptationRecord>,
    estimate_time: WindowedStats,
}

impl AppsDispatcher {
    pub fn new(cfg: AppsConfig) -> Self {
        assert!(cfg.m >= 1, "at least one host");
        let batch = batch_size(&cfg.sizing);
        let nb = batches_per_epoch(&cfg.sizing);
        let beta = cfg.sizing.beta.is_finite().then_some(cfg.sizing.beta);
        let active = if cfg.warmup { PolicyKind::ALL[0] } else { PolicyKind::RoundRobin };
        Self {
            batch,
            policies: PolicyKind::ALL.iter().map(|&k| SplittingPolicy::new(k)).collect(),
            active,
            hist: AssignHistogram::new(cfg.m, cfg.buckets, cfg.bucket_width_us),
            splitter_gaps: Gaps::new(cfg.stats_window),
            last_seen: None,
            placed: 0,
            beta,
            solution: TradeoffSolution {
                q: nb,
                lag: 1,
                mse: None,
                fallback: true,
            },
            current: BatchAcc::default(),
            history: Vec::new(),
            epoch_services: Vec::new(),
            epoch_redirects: Vec::new(),
            segment_index: 0,
            in_segment: 0,
            pending: VecDeque::new(),
            decisions: Vec::new(),
            trace: Vec::new(),
            estimate_time: WindowedStats::new(64),
            cfg,
        }
    }

    pub fn histogram(&self) -> &AssignHistogram {
        &self.hist
    }

    pub fn trace(&self) -> &[AdaptationRecord] {
        &self.trace
    }

    pub fn decisions(&self) -> &[PolicyDecision] {
        &self.decisions
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn solution(&self) -> TradeoffSolution {
        self.solution
    }

    /// Error bound in force (configured or calibrated).
    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Per-batch wait estimates gathered so far, seconds.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    fn tau(&self) -> u64 {
        self.cfg.sizing.tau as u64
    }

    fn epoch(&self) -> usize {
        (self.placed / self.tau()) as usize
    }

    fn in_warmup(&self) -> bool {
        self.cfg.warmup && self.placed < self.tau() * PolicyKind::ALL.len() as u64
    }

    fn segment_len(&self) -> usize {
        self.solution.q * self.batch
    }

    fn note(&mut self, kind: PolicyKind, first: usize, redirect: Option<(usize, Micros)>) {
        self.hist.record_assignment(kind, first, redirect);
    }

    fn shadow(&mut self, event: &PrimitiveEvent, hosts: &[HostState], capacity: usize, redirect: &RedirectModel) {
        for kind in PolicyKind::ALL {
            if kind == self.active {
                continue;
            }
            let policy = &mut self.policies[slot(kind)];
            let ranking = policy.rank_hosts(hosts);
            if let Some((target, from)) = place(&ranking, hosts, capacity) {
                policy.advance(hosts.len());
                let first = from.unwrap_or(target);
                let r = from.map(|_| (target, redirect.latency(event)));
                self.note(kind, first, r);
            }
        }
    }

    fn close_batch(&mut self, hosts: &[HostState]) {
        let acc = std::mem::take(&mut self.current);
        let Some((gap, c2a)) = mean_scv(&acc.gaps) else {
            return;
        };
        let (svc, c2s) = mean_scv(&acc.services).unwrap_or_else(|| {
            let mu = hosts.iter().map(|h| h.service_rate).sum::<f64>() / hosts.len() as f64;
            (1e6 / mu, 1.0)
        });
        let mu = 1e6 / svc;
        let lambda = 1e6 / gap;
        let m = self.cfg.m;
        // Saturated batches are scored just below the stability limit so
        // the error stays finite.
        let rho = (lambda / (m as f64 * mu)).min(0.99);
        if let Ok(f) = multiserver_wait(rho, mu, m, c2a, c2s) {
            self.history.push(f);
        }
    }

    fn timing(&self) -> TimingStats {
        let (svc, c2s) = mean_scv(&self.epoch_services).unwrap_or((0.0, 1.0));
        let t_es = self
            .cfg
            .estimate_cost_us
            .or_else(|| self.estimate_time.mean())
            .unwrap_or(0.0);
        TimingStats {
            t_ps_batch: svc * self.batch as f64,
            t_rd: if self.epoch_redirects.is_empty() {
                0.0
            } else {
                self.epoch_redirects.iter().sum::<f64>() / self.epoch_redirects.len() as f64
            },
            t_es_batch: t_es,
            c2_a: self.splitter_gaps.stats.scv().unwrap_or(1.0),
            c2_s: c2s,
        }
    }

    fn calibrate_beta(&self, recent: &[f64]) -> Option<f64> {
        let nb = recent.len();
        let mut errors = Vec::new();
        for q in (1..=nb).filter(|q| nb % q == 0) {
            for lag in 1..nb {
                match estimation_mse(recent, q, lag) {
                    Some(e) => errors.push(e),
                    None => break,
                }
            }
        }
        // Strict bound: keep at least the zero-error pairs feasible.
        quantile(&errors, 0.9).map(|b| b.max(f64::MIN_POSITIVE))
    }

    fn close_epoch(&mut self) {
        for kind in PolicyKind::ALL {
            self.hist.decay(kind, self.cfg.decay);
        }
        self.hist.decay_latencies(self.cfg.decay);
        let nb = batches_per_epoch(&self.cfg.sizing);
        if self.history.len() >= nb {
            let recent = self.history[self.history.len() - nb..].to_vec();
            if self.beta.is_none() {
                self.beta = self.calibrate_beta(&recent);
            }
            if let Some(beta) = self.beta {
                let params = SizingParams { beta, ..self.cfg.sizing };
                self.solution = tradeoff_solve(&self.timing(), &params, self.cfg.m, &recent);
            }
        }
        let keep = 4 * nb;
        if self.history.len() > keep {
            self.history.drain(..self.history.len() - keep);
        }
        self.epoch_services.clear();
        self.epoch_redirects.clear();
    }

    fn decide(&mut self, hosts: &[HostState]) {
        let started = Instant::now();
        let estimates: Vec<_> = PolicyKind::ALL
            .iter()
            .map(|&kind| (kind, estimate_policy_wait(&self.hist, hosts, kind)))
            .collect();
        let decision = select_policy(&estimates, self.epoch());
        if self.cfg.estimate_cost_us.is_none() {
            let per_batch = started.elapsed().as_secs_f64() * 1e6 / self.solution.q.max(1) as f64;
            self.estimate_time.push(per_batch);
        }
        for (kind, wait) in &decision.waits {
            self.trace.push(AdaptationRecord {
                epoch: decision.epoch,
                candidate: *kind,
                expected_wait: *wait,
                chosen: decision.chosen,
                q: self.solution.q,
                lag: self.solution.lag,
                mse: self.solution.mse,
            });
        }
        let apply_at = self.segment_index + self.solution.lag + 1;
        self.pending.push_back((apply_at, decision.clone()));
        self.decisions.push(decision);
    }

    fn after_placement(&mut self, hosts: &[HostState]) {
        self.placed += 1;
        if self.placed % self.batch as u64 == 0 {
            self.close_batch(hosts);
        }
        if self.placed % self.tau() == 0 {
            self.close_epoch();
        }
        if self.in_warmup() {
            self.active = PolicyKind::ALL[self.epoch()];
            return;
        }
        self.in_segment += 1;
        if self.in_segment >= self.segment_len() {
            self.decide(hosts);
            self.in_segment = 0;
            self.segment_index += 1;
            while let Some((at, _)) = self.pending.front() {
                if *at > self.segment_index {
                    break;
                }
                let (_, d) = self.pending.pop_front().expect("front exists");
                self.active = d.chosen;
            }
        }
    }
}

impl Dispatcher for AppsDispatcher {
    fn dispatch(
        &mut self,
        now: Micros,
        event: PrimitiveEvent,
        hosts: &[HostState],
        capacity: usize,
        redirect: &RedirectModel,
    ) -> SplitDecision {
        if self.last_seen != Some(event.id) {
            self.last_seen = Some(event.id);
            if let Some(gap) = self.splitter_gaps.push(now) {
                self.current.gaps.push(gap);
            }
            if self.cfg.shadow {
                self.shadow(&event, hosts, capacity, redirect);
            }
        }
        let kind = self.active;
        let decision = split(now, event, &mut self.policies[slot(kind)], hosts, capacity, redirect);
        if let SplitDecision::Routed(r) = &decision {
            let first = r.redirected_from.unwrap_or(r.target_host);
            let red = r.redirect_latency.map(|lat| (r.target_host, lat));
            if let Some(lat) = r.redirect_latency {
                self.epoch_redirects.push(lat as f64);
            }
            self.note(kind, first, red);
            self.after_placement(hosts);
        }
        decision
    }

    fn on_completion(&mut self, _now: Micros, completion: &Completion, _hosts: &[HostState]) {
        let s = completion.service_time as f64;
        self.current.services.push(s);
        self.epoch_services.push(s);
    }

    fn active(&self) -> PolicyKind {
        self.active
    }
}

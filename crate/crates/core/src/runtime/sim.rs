//! Virtual-time execution: a single-threaded discrete-event simulation of
//! the splitter, `m` FIFO workers and the merger.
//!
//! At equal timestamps input arrivals are handled before worker events, so a
//! replica event stamped `t` is visible to anything finishing at `t`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::event::{CompositeEvent, EventType, Micros, PrimitiveEvent};
use crate::policy::{PolicyKind, SplittingPolicy};
use crate::query::PatternQuery;

use super::split::{merge, replicate, split, RedirectModel, RoutedEvent, SplitDecision};
use super::worker::{Evaluation, PatternWorker, WorkSize};
use super::{HostState, RuntimeConfig, RuntimeError};

/// Service-time model for partitioned events.
pub trait ServiceTimer {
    /// Service duration in µs for `trigger` at `host`.
    fn service_time(&mut self, host: usize, trigger: &PrimitiveEvent, work: WorkSize) -> Micros;
}

/// Constant service time; handy for tests.
#[derive(Debug, Clone, Copy)]
pub struct FixedServiceTime(pub Micros);

impl ServiceTimer for FixedServiceTime {
    fn service_time(&mut self, _host: usize, _trigger: &PrimitiveEvent, _work: WorkSize) -> Micros {
        self.0
    }
}

/// Completion report for one partitioned event.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub event_id: u64,
    pub event_ts: Micros,
    pub host: usize,
    pub arrival: Micros,
    pub departure: Micros,
    pub service_time: Micros,
    pub redirected_from: Option<usize>,
    pub redirect_latency: Option<Micros>,
    pub matches: usize,
    /// Policy that placed the event.
    pub policy: PolicyKind,
}

impl Completion {
    pub fn processing_time(&self) -> Micros {
        self.departure - self.arrival
    }
}

/// Chooses a host for each partitioned event.
pub trait Dispatcher {
    fn dispatch(
        &mut self,
        now: Micros,
        event: PrimitiveEvent,
        hosts: &[HostState],
        capacity: usize,
        redirect: &RedirectModel,
    ) -> SplitDecision;

    fn on_completion(&mut self, _now: Micros, _completion: &Completion, _hosts: &[HostState]) {}

    /// Policy currently placing events.
    fn active(&self) -> PolicyKind;
}

/// Uses one fixed policy for the whole run.
#[derive(Debug, Clone)]
pub struct StaticDispatcher {
    policy: SplittingPolicy,
}

impl StaticDispatcher {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            policy: SplittingPolicy::new(kind),
        }
    }
}

impl Dispatcher for StaticDispatcher {
    fn dispatch(
        &mut self,
        now: Micros,
        event: PrimitiveEvent,
        hosts: &[HostState],
        capacity: usize,
        redirect: &RedirectModel,
    ) -> SplitDecision {
        split(now, event, &mut self.policy, hosts, capacity, redirect)
    }

    fn active(&self) -> PolicyKind {
        self.policy.kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAction {
    Enqueue,
    Dequeue,
    Match,
    Redirect,
}

impl fmt::Display for TraceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceAction::Enqueue => "enqueue",
            TraceAction::Dequeue => "dequeue",
            TraceAction::Match => "match",
            TraceAction::Redirect => "redirect",
        })
    }
}

/// One line of the runtime audit log: `ts,host,event_id,action`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub ts: Micros,
    pub host: usize,
    pub event_id: u64,
    pub action: TraceAction,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.ts, self.host, self.event_id, self.action)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    /// Merged output (deterministic order); empty unless outputs are collected.
    pub outputs: Vec<CompositeEvent>,
    pub match_count: u64,
    /// One entry per partitioned event, in completion order.
    pub completions: Vec<Completion>,
    /// Partitioned events that entered the splitter.
    pub partitioned_in: u64,
    /// Partitioned events delivered to each host.
    pub delivered: Vec<u64>,
    pub redirects: u64,
    /// Total service time per host, µs.
    pub busy_time: Vec<Micros>,
    pub hosts: Vec<HostState>,
    pub end_time: Micros,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug)]
struct Queued {
    event: PrimitiveEvent,
    ready_at: Micros,
    redirected_from: Option<usize>,
    redirect_latency: Option<Micros>,
    policy: PolicyKind,
}

#[derive(Debug)]
struct InService {
    job: Queued,
    started: Micros,
    eval: Option<Evaluation>,
}

#[derive(Debug)]
struct Finishing {
    job: Queued,
    service_time: Micros,
}

struct HostRt {
    worker: PatternWorker,
    queue: VecDeque<Queued>,
    in_service: Option<InService>,
    finishing: VecDeque<Finishing>,
    queued_bytes: u64,
    wake_pending: bool,
    outputs: Vec<CompositeEvent>,
}

impl HostRt {
    fn oldest_trigger_ts(&self) -> Option<Micros> {
        [
            self.finishing.front().map(|f| f.job.event.start_ts()),
            self.in_service.as_ref().map(|s| s.job.event.start_ts()),
            self.queue.front().map(|q| q.event.start_ts()),
        ]
        .into_iter()
        .flatten()
        .min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Wake,
    Complete,
    Finalize,
}

struct Engine<'a> {
    cfg: &'a RuntimeConfig,
    service: &'a mut dyn ServiceTimer,
    dispatcher: &'a mut dyn Dispatcher,
    hosts: Vec<HostState>,
    rt: Vec<HostRt>,
    held: VecDeque<PrimitiveEvent>,
    heap: BinaryHeap<Reverse<(Micros, Kind, u64, usize)>>,
    seq: u64,
    lookahead: Micros,
    out: RunOutcome,
}

impl Engine<'_> {
    fn schedule(&mut self, at: Micros, kind: Kind, host: usize) {
        self.seq += 1;
        self.heap.push(Reverse((at, kind, self.seq, host)));
    }

    fn trace(&mut self, ts: Micros, host: usize, event_id: u64, action: TraceAction) {
        if self.cfg.trace {
            self.out.trace.push(TraceRecord {
                ts,
                host,
                event_id,
                action,
            });
        }
    }

    fn evict(&mut self, now: Micros) {
        let held = self.held.front().map(PrimitiveEvent::start_ts);
        for rt in &mut self.rt {
            let bound = [rt.oldest_trigger_ts(), held, Some(now)]
                .into_iter()
                .flatten()
                .min()
                .expect("now is always present");
            rt.worker.evict_for(bound);
        }
    }

    fn refresh_loads(&mut self) {
        for (h, rt) in self.hosts.iter_mut().zip(&mut self.rt) {
            h.mem_load = rt.queued_bytes + rt.worker.buffer_bytes();
        }
    }

    fn on_replica(&mut self, now: Micros, event: &PrimitiveEvent) {
        for routed in replicate(event, self.cfg.m).expect("m validated") {
            self.rt[routed.target_host].worker.insert_replica(routed.event);
        }
        self.evict(now);
    }

    fn on_partitioned(&mut self, now: Micros, mut event: PrimitiveEvent) {
        self.out.partitioned_in += 1;
        if event.arrival_ts().is_none() {
            event.stamp_arrival(now).expect("arrival checked unset");
        }
        self.held.push_back(event);
        self.release_held(now);
    }

    fn release_held(&mut self, now: Micros) {
        while let Some(event) = self.held.pop_front() {
            self.refresh_loads();
            let decision = self.dispatcher.dispatch(
                now,
                event,
                &self.hosts,
                self.cfg.queue_capacity,
                &self.cfg.redirect,
            );
            match decision {
                SplitDecision::Held(e) => {
                    self.held.push_front(e);
                    break;
                }
                SplitDecision::Routed(r) => self.enqueue(now, r),
            }
        }
    }

    fn enqueue(&mut self, now: Micros, r: RoutedEvent) {
        let h = r.target_host;
        let id = r.event.id;
        if let Some(from) = r.redirected_from {
            self.out.redirects += 1;
            self.trace(now, from, id, TraceAction::Redirect);
        }
        self.trace(now, h, id, TraceAction::Enqueue);
        self.out.delivered[h] += 1;
        self.hosts[h].queue_len += 1;
        self.hosts[h].record_arrival(now);
        let rt = &mut self.rt[h];
        rt.queued_bytes += r.event.size_bytes() as u64;
        rt.queue.push_back(Queued {
            ready_at: now + r.redirect_latency.unwrap_or(0),
            event: r.event,
            redirected_from: r.redirected_from,
            redirect_latency: r.redirect_latency,
            policy: self.dispatcher.active(),
        });
        self.try_start(now, h);
    }

    fn try_start(&mut self, now: Micros, h: usize) {
        let rt = &mut self.rt[h];
        if rt.in_service.is_some() {
            return;
        }
        let Some(front) = rt.queue.front() else {
            return;
        };
        if front.ready_at > now {
            if !rt.wake_pending {
                rt.wake_pending = true;
                let at = front.ready_at;
                self.schedule(at, Kind::Wake, h);
            }
            return;
        }
        let job = rt.queue.pop_front().expect("front exists");
        let work = rt.worker.work_size(&job.event);
        let eval = (self.lookahead == 0).then(|| rt.worker.evaluate(&job.event, self.cfg.collect_outputs));
        let duration = self.service.service_time(h, &job.event, work).max(1);
        let id = job.event.id;
        rt.in_service = Some(InService {
            job,
            started: now,
            eval,
        });
        self.hosts[h].busy = true;
        self.trace(now, h, id, TraceAction::Dequeue);
        self.schedule(now + duration, Kind::Complete, h);
    }

    fn on_complete(&mut self, now: Micros, h: usize) {
        let s = self.rt[h].in_service.take().expect("completion without service");
        let service_time = now - s.started;
        self.out.busy_time[h] += service_time;
        let host = &mut self.hosts[h];
        host.record_service(service_time);
        host.queue_len -= 1;
        host.busy = false;
        let ready = s.job.event.start_ts() + self.lookahead;
        if now >= ready {
            let eval = match s.eval {
                Some(e) => e,
                None => self.rt[h].worker.evaluate(&s.job.event, self.cfg.collect_outputs),
            };
            self.finish(now, h, s.job, service_time, eval);
        } else {
            self.rt[h].finishing.push_back(Finishing {
                job: s.job,
                service_time,
            });
            self.schedule(ready, Kind::Finalize, h);
        }
        self.release_held(now);
        self.try_start(now, h);
    }

    fn on_finalize(&mut self, now: Micros, h: usize) {
        let f = self.rt[h].finishing.pop_front().expect("finalize without pending trigger");
        let eval = self.rt[h].worker.evaluate(&f.job.event, self.cfg.collect_outputs);
        self.finish(now, h, f.job, f.service_time, eval);
        self.evict(now);
    }

    fn finish(&mut self, now: Micros, h: usize, mut job: Queued, service_time: Micros, eval: Evaluation) {
        job.event.set_departure(now).expect("departure follows arrival");
        let id = job.event.id;
        if self.cfg.trace {
            for _ in 0..eval.count {
                self.trace(now, h, id, TraceAction::Match);
            }
        }
        let rt = &mut self.rt[h];
        rt.queued_bytes -= job.event.size_bytes() as u64;
        rt.outputs.extend(eval.matches);
        self.out.match_count += eval.count as u64;
        let completion = Completion {
            event_id: id,
            event_ts: job.event.start_ts(),
            host: h,
            arrival: job.event.arrival_ts().expect("stamped by split"),
            departure: now,
            service_time,
            redirected_from: job.redirected_from,
            redirect_latency: job.redirect_latency,
            matches: eval.count,
            policy: job.policy,
        };
        self.dispatcher.on_completion(now, &completion, &self.hosts);
        self.out.completions.push(completion);
    }
}

/// Runs `stream` (sorted by timestamp) through the split / process* / merge
/// pipeline in virtual time.
pub fn run_virtual(
    query: Arc<PatternQuery>,
    stream: &[PrimitiveEvent],
    cfg: &RuntimeConfig,
    service: &mut dyn ServiceTimer,
    dispatcher: &mut dyn Dispatcher,
) -> Result<RunOutcome, RuntimeError> {
    cfg.validate()?;
    if let Some(pos) = stream.windows(2).position(|w| w[1].start_ts() < w[0].start_ts()) {
        return Err(RuntimeError::UnsortedInput(pos + 1));
    }
    let partitioned: EventType = query.partitioned_type();
    let replicated = query.replicated_types();
    let m = cfg.m;
    let mut engine = Engine {
        lookahead: query.lookahead(),
        hosts: (0..m)
            .map(|i| HostState::new(i, cfg.prior_service_rate, cfg.stats_window))
            .collect(),
        rt: (0..m)
            .map(|_| HostRt {
                worker: PatternWorker::new(query.clone()),
                queue: VecDeque::new(),
                in_service: None,
                finishing: VecDeque::new(),
                queued_bytes: 0,
                wake_pending: false,
                outputs: Vec::new(),
            })
            .collect(),
        cfg,
        service,
        dispatcher,
        held: VecDeque::new(),
        heap: BinaryHeap::new(),
        seq: 0,
        out: RunOutcome {
            delivered: vec![0; m],
            busy_time: vec![0; m],
            ..RunOutcome::default()
        },
    };

    let mut next = 0;
    let mut now = 0;
    loop {
        let input_ts = stream.get(next).map(PrimitiveEvent::start_ts);
        let event_ts = engine.heap.peek().map(|Reverse((t, ..))| *t);
        match (input_ts, event_ts) {
            (None, None) => break,
            (Some(t), e) if e.is_none_or(|e| t <= e) => {
                now = t;
                let ev = &stream[next];
                next += 1;
                if ev.event_type == partitioned {
                    engine.on_partitioned(now, ev.clone());
                } else if replicated.contains(&ev.event_type) {
                    engine.on_replica(now, ev);
                }
            }
            _ => {
                let Reverse((t, kind, _, h)) = engine.heap.pop().expect("peeked");
                now = t;
                match kind {
                    Kind::Wake => {
                        engine.rt[h].wake_pending = false;
                        engine.try_start(now, h);
                    }
                    Kind::Complete => engine.on_complete(now, h),
                    Kind::Finalize => engine.on_finalize(now, h),
                }
            }
        }
    }
    debug_assert!(engine.held.is_empty());

    let mut out = engine.out;
    out.end_time = now;
    out.outputs = merge(engine.rt.into_iter().map(|rt| rt.outputs).collect(), true);
    out.hosts = engine.hosts;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{make_primitive, Value};
    use crate::query::{parse_query, reference_evaluate};

    fn ev(ty: &str, ts: Micros, id: u64, key: i64) -> PrimitiveEvent {
        make_primitive(EventType::new(ty).unwrap(), ts, vec![(Arc::from("Id"), Value::Int(key))])
            .unwrap()
            .with_id(id)
    }

    fn run(q: &str, stream: &[PrimitiveEvent], cfg: &RuntimeConfig, kind: PolicyKind, svc: Micros) -> RunOutcome {
        let query = Arc::new(parse_query(q).unwrap());
        run_virtual(query, stream, cfg, &mut FixedServiceTime(svc), &mut StaticDispatcher::new(kind)).unwrap()
    }

    #[test]
    fn empty_buffer_departs_after_service() {
        let stream = vec![ev("E2", 1_000, 0, 1)];
        let out = run("PATTERN SEQ(E1, E2) WITHIN 1 s", &stream, &RuntimeConfig::default(), PolicyKind::RoundRobin, 250);
        assert_eq!(out.match_count, 0);
        assert_eq!(out.completions.len(), 1);
        assert_eq!(out.completions[0].arrival, 1_000);
        assert_eq!(out.completions[0].departure, 1_250);
    }

    #[test]
    fn lookahead_defers_departure_to_window_end() {
        let stream = vec![ev("E2", 0, 0, 1), ev("E1", 300_000, 1, 1)];
        let out = run("PATTERN AND(E1, E2) WITHIN 1 s", &stream, &RuntimeConfig::default(), PolicyKind::ShortestQueue, 10);
        assert_eq!(out.match_count, 1);
        assert_eq!(out.completions[0].departure, 1_000_000);
    }

    #[test]
    fn backpressure_never_drops() {
        // Capacity 1, two hosts, a burst of simultaneous events.
        let stream: Vec<_> = (0..20).map(|i| ev("E2", 100, i, 0)).collect();
        let cfg = RuntimeConfig {
            queue_capacity: 1,
            trace: true,
            ..RuntimeConfig::default()
        };
        let out = run("PATTERN SEQ(E1, E2) WITHIN 1 s", &stream, &cfg, PolicyKind::RoundRobin, 1_000);
        assert_eq!(out.completions.len(), 20);
        assert_eq!(out.delivered.iter().sum::<u64>(), 20);
        // Last event waited for nine earlier services on its host.
        let worst = out.completions.iter().map(Completion::processing_time).max().unwrap();
        assert_eq!(worst, 10_000);
        assert!(out.trace.iter().any(|t| t.action == TraceAction::Dequeue));
        assert_eq!(out.trace[0].to_string(), "100,0,0,enqueue");
    }

    #[test]
    fn matches_equal_reference() {
        let mut stream = Vec::new();
        for i in 0..200u64 {
            let ty = if i % 3 == 0 { "E2" } else { "E1" };
            stream.push(ev(ty, i as i64 * 7_000, i, (i % 4) as i64));
        }
        let q = "PATTERN SEQ(E1, E2) WHERE [Id] WITHIN 100 ms";
        let query = parse_query(q).unwrap();
        let expected = reference_evaluate(&query, &stream);
        for kind in PolicyKind::ALL {
            let cfg = RuntimeConfig {
                m: 3,
                queue_capacity: 2,
                ..RuntimeConfig::default()
            };
            let out = run(q, &stream, &cfg, kind, 15_000);
            let got = crate::query::MatchSet::from_unsorted(out.outputs);
            assert_eq!(got.id_tuples(), expected.id_tuples(), "{kind}");
        }
    }

    #[test]
    fn unsorted_input_rejected() {
        let stream = vec![ev("E1", 10, 0, 0), ev("E2", 5, 1, 0)];
        let query = Arc::new(parse_query("PATTERN SEQ(E1, E2) WITHIN 1 s").unwrap());
        let err = run_virtual(
            query,
            &stream,
            &RuntimeConfig::default(),
            &mut FixedServiceTime(1),
            &mut StaticDispatcher::new(PolicyKind::RoundRobin),
        )
        .unwrap_err();
        assert_eq!(err, RuntimeError::UnsortedInput(1));
    }
}

//! Wall-clock execution: the splitter runs on the calling thread and each
//! worker on its own OS thread.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};

use crate::event::{Micros, PrimitiveEvent};
use crate::policy::PolicyKind;
use crate::query::PatternQuery;

use super::sim::{Completion, Dispatcher, RunOutcome};
use super::split::{merge, SplitDecision};
use super::worker::PatternWorker;
use super::{HostState, RuntimeConfig, RuntimeError};

enum Msg {
    Replica(PrimitiveEvent),
    Trigger {
        event: PrimitiveEvent,
        redirected_from: Option<usize>,
        redirect_latency: Option<Micros>,
        policy: PolicyKind,
    },
    End,
}

struct Pending {
    event: PrimitiveEvent,
    redirected_from: Option<usize>,
    redirect_latency: Option<Micros>,
    policy: PolicyKind,
    service_time: Micros,
}

#[derive(Default)]
struct Shared {
    queue_len: AtomicUsize,
    queued_bytes: AtomicU64,
    buffer_bytes: AtomicU64,
}

struct WorkerCtx {
    host: usize,
    query: Arc<PatternQuery>,
    collect: bool,
    start: Instant,
    shared: Arc<Shared>,
    done: Sender<Completion>,
}

fn elapsed(start: Instant) -> Micros {
    start.elapsed().as_micros() as Micros
}

fn worker_loop(ctx: WorkerCtx, rx: Receiver<Msg>) -> (Vec<crate::event::CompositeEvent>, u64) {
    let mut worker = PatternWorker::new(ctx.query.clone());
    let lookahead = ctx.query.lookahead();
    let mut pending: VecDeque<Pending> = VecDeque::new();
    let mut outputs = Vec::new();
    let mut count = 0u64;
    let mut watermark = Micros::MIN;

    let finalize = |worker: &mut PatternWorker, p: Pending, outputs: &mut Vec<_>, count: &mut u64| {
        let mut ev = p.event;
        let eval = worker.evaluate(&ev, ctx.collect);
        let now = elapsed(ctx.start);
        let arrival = ev.arrival_ts().expect("stamped by split");
        ev.set_departure(now.max(arrival)).expect("departure follows arrival");
        *count += eval.count as u64;
        outputs.extend(eval.matches);
        let _ = ctx.done.send(Completion {
            event_id: ev.id,
            event_ts: ev.start_ts(),
            host: ctx.host,
            arrival,
            departure: now.max(arrival),
            service_time: p.service_time,
            redirected_from: p.redirected_from,
            redirect_latency: p.redirect_latency,
            matches: eval.count,
            policy: p.policy,
        });
    };

    for msg in rx.iter() {
        match msg {
            Msg::Replica(e) => {
                watermark = watermark.max(e.start_ts());
                worker.insert_replica(e);
            }
            Msg::Trigger {
                event,
                redirected_from,
                redirect_latency,
                policy,
            } => {
                watermark = watermark.max(event.start_ts());
                if let Some(lat) = redirect_latency {
                    thread::sleep(Duration::from_micros(lat.max(0) as u64));
                }
                let t0 = Instant::now();
                let _ = worker.work_size(&event);
                let service_time = t0.elapsed().as_micros() as Micros;
                ctx.shared.queue_len.fetch_sub(1, Ordering::AcqRel);
                ctx.shared
                    .queued_bytes
                    .fetch_sub(event.size_bytes() as u64, Ordering::AcqRel);
                pending.push_back(Pending {
                    event,
                    redirected_from,
                    redirect_latency,
                    policy,
                    service_time,
                });
            }
            Msg::End => break,
        }
        while pending
            .front()
            .is_some_and(|p| p.event.start_ts() + lookahead < watermark)
        {
            let p = pending.pop_front().expect("front exists");
            finalize(&mut worker, p, &mut outputs, &mut count);
        }
        let bound = pending.front().map_or(watermark, |p| p.event.start_ts().min(watermark));
        worker.evict_for(bound);
        ctx.shared.buffer_bytes.store(worker.buffer_bytes(), Ordering::Release);
    }
    while let Some(p) = pending.pop_front() {
        finalize(&mut worker, p, &mut outputs, &mut count);
    }
    (outputs, count)
}

/// Runs `stream` on `cfg.m` worker threads. With `paced`, input is released
/// at its own timestamps relative to the start; otherwise as fast as the
/// workers accept it.
pub fn run_threaded(
    query: Arc<PatternQuery>,
    stream: &[PrimitiveEvent],
    cfg: &RuntimeConfig,
    dispatcher: &mut dyn Dispatcher,
    paced: bool,
) -> Result<RunOutcome, RuntimeError> {
    cfg.validate()?;
    if let Some(pos) = stream.windows(2).position(|w| w[1].start_ts() < w[0].start_ts()) {
        return Err(RuntimeError::UnsortedInput(pos + 1));
    }
    let m = cfg.m;
    let partitioned = query.partitioned_type();
    let replicated = query.replicated_types();
    let start = Instant::now();
    let base_ts = stream.first().map_or(0, PrimitiveEvent::start_ts);
    let (done_tx, done_rx) = unbounded::<Completion>();
    let shared: Vec<Arc<Shared>> = (0..m).map(|_| Arc::new(Shared::default())).collect();
    let mut senders = Vec::with_capacity(m);
    let mut handles = Vec::with_capacity(m);
    for (h, sh) in shared.iter().enumerate() {
        let (tx, rx) = unbounded();
        senders.push(tx);
        let ctx = WorkerCtx {
            host: h,
            query: query.clone(),
            collect: cfg.collect_outputs,
            start,
            shared: sh.clone(),
            done: done_tx.clone(),
        };
        handles.push(thread::spawn(move || worker_loop(ctx, rx)));
    }
    drop(done_tx);

    let mut hosts: Vec<HostState> = (0..m)
        .map(|i| HostState::new(i, cfg.prior_service_rate, cfg.stats_window))
        .collect();
    let mut out = RunOutcome {
        delivered: vec![0; m],
        busy_time: vec![0; m],
        ..RunOutcome::default()
    };

    let absorb = |hosts: &mut Vec<HostState>, out: &mut RunOutcome, dispatcher: &mut dyn Dispatcher, c: Completion| {
        hosts[c.host].record_service(c.service_time.max(1));
        out.busy_time[c.host] += c.service_time;
        dispatcher.on_completion(c.departure, &c, hosts);
        out.completions.push(c);
    };

    for ev in stream {
        if paced {
            let due = Duration::from_micros((ev.start_ts() - base_ts).max(0) as u64);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                thread::sleep(wait);
            }
        }
        if ev.event_type != partitioned {
            if replicated.contains(&ev.event_type) {
                for tx in &senders {
                    tx.send(Msg::Replica(ev.clone())).map_err(|_| RuntimeError::WorkerPanicked)?;
                }
            }
            continue;
        }
        out.partitioned_in += 1;
        let mut event = ev.clone();
        if event.arrival_ts().is_none() {
            event.stamp_arrival(elapsed(start)).expect("arrival checked unset");
        }
        loop {
            while let Ok(c) = done_rx.try_recv() {
                absorb(&mut hosts, &mut out, dispatcher, c);
            }
            let now = elapsed(start);
            for (h, sh) in hosts.iter_mut().zip(&shared) {
                h.queue_len = sh.queue_len.load(Ordering::Acquire);
                h.mem_load = sh.queued_bytes.load(Ordering::Acquire) + sh.buffer_bytes.load(Ordering::Acquire);
            }
            match dispatcher.dispatch(now, event, &hosts, cfg.queue_capacity, &cfg.redirect) {
                SplitDecision::Held(e) => {
                    event = e;
                    thread::yield_now();
                }
                SplitDecision::Routed(r) => {
                    let h = r.target_host;
                    shared[h].queue_len.fetch_add(1, Ordering::AcqRel);
                    shared[h]
                        .queued_bytes
                        .fetch_add(r.event.size_bytes() as u64, Ordering::AcqRel);
                    hosts[h].record_arrival(now);
                    out.delivered[h] += 1;
                    if r.redirected_from.is_some() {
                        out.redirects += 1;
                    }
                    senders[h]
                        .send(Msg::Trigger {
                            event: r.event,
                            redirected_from: r.redirected_from,
                            redirect_latency: r.redirect_latency,
                            policy: dispatcher.active(),
                        })
                        .map_err(|_| RuntimeError::WorkerPanicked)?;
                    break;
                }
            }
        }
    }
    for tx in &senders {
        tx.send(Msg::End).map_err(|_| RuntimeError::WorkerPanicked)?;
    }
    let mut outputs = Vec::with_capacity(m);
    for handle in handles {
        let (o, c) = handle.join().map_err(|_| RuntimeError::WorkerPanicked)?;
        outputs.push(o);
        out.match_count += c;
    }
    for c in done_rx.iter() {
        absorb(&mut hosts, &mut out, dispatcher, c);
    }
    out.end_time = elapsed(start);
    out.outputs = merge(outputs, true);
    for (h, sh) in hosts.iter_mut().zip(&shared) {
        h.queue_len = sh.queue_len.load(Ordering::Acquire);
    }
    out.hosts = hosts;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{make_primitive, EventType, Value};
    use crate::query::{parse_query, reference_evaluate, MatchSet};
    use crate::runtime::StaticDispatcher;

    #[test]
    fn threaded_output_equals_reference() {
        let mut stream = Vec::new();
        for i in 0..400u64 {
            let ty = ["E1", "E2", "E3"][(i % 3) as usize];
            let attrs = vec![(Arc::from("Id"), Value::Int((i % 5) as i64))];
            stream.push(
                make_primitive(EventType::new(ty).unwrap(), i as i64 * 1_000, attrs)
                    .unwrap()
                    .with_id(i),
            );
        }
        for q in [
            "PATTERN SEQ(E1, E2) WHERE [Id] WITHIN 50 ms",
            "PATTERN AND(E1, E3) WITHIN 20 ms",
            "PATTERN SEQ(AND(E1, E3), E2) WHERE [Id] WITHIN 40 ms",
        ] {
            let query = Arc::new(parse_query(q).unwrap());
            let expected = reference_evaluate(&query, &stream);
            for kind in PolicyKind::ALL {
                let cfg = RuntimeConfig {
                    m: 3,
                    queue_capacity: 4,
                    redirect: super::super::RedirectModel { base_us: 0, per_byte_us: 0.0 },
                    ..RuntimeConfig::default()
                };
                let out = run_threaded(query.clone(), &stream, &cfg, &mut StaticDispatcher::new(kind), false).unwrap();
                assert_eq!(out.completions.len() as u64, out.partitioned_in);
                let got = MatchSet::from_unsorted(out.outputs);
                assert_eq!(got.id_tuples(), expected.id_tuples(), "{q} {kind}");
            }
        }
    }
}

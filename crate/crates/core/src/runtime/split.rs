//! Split, replicate and merge operators.

use crate::event::{CompositeEvent, Micros, PrimitiveEvent};
use crate::policy::{PolicyRanking, SplittingPolicy};

use super::{HostState, RuntimeError};

/// Latency charged to an event moved off its first-choice host.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedirectModel {
    pub base_us: Micros,
    /// Transfer cost per event byte, in µs.
    pub per_byte_us: f64,
}

impl Default for RedirectModel {
    fn default() -> Self {
        Self {
            base_us: 1_000,
            per_byte_us: 0.01,
        }
    }
}

impl RedirectModel {
    pub fn latency(&self, event: &PrimitiveEvent) -> Micros {
        self.base_us + (event.size_bytes() as f64 * self.per_byte_us).round() as Micros
    }
}

/// A partitioned or replicated event bound for one host.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedEvent {
    pub event: PrimitiveEvent,
    pub target_host: usize,
    pub redirected_from: Option<usize>,
    /// Present exactly when `redirected_from` is.
    pub redirect_latency: Option<Micros>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitDecision {
    Routed(RoutedEvent),
    /// Every queue is at capacity; the event waits at the splitter.
    Held(PrimitiveEvent),
}

/// Applies the capacity rule to a ranking: the first host with room, and
/// the first-choice host when that differs.
pub fn place(ranking: &PolicyRanking, hosts: &[HostState], capacity: usize) -> Option<(usize, Option<usize>)> {
    let first = ranking.first();
    ranking
        .hosts()
        .iter()
        .copied()
        .find(|&h| hosts[h].queue_len < capacity)
        .map(|h| (h, (h != first).then_some(first)))
}

/// Routes one partitioned event. Stamps the arrival time on first attempt;
/// advances the policy's cursor only when the event is placed.
pub fn split(
    now: Micros,
    mut event: PrimitiveEvent,
    policy: &mut SplittingPolicy,
    hosts: &[HostState],
    capacity: usize,
    redirect: &RedirectModel,
) -> SplitDecision {
    if event.arrival_ts().is_none() {
        event.stamp_arrival(now).expect("arrival checked unset");
    }
    let ranking = policy.rank_hosts(hosts);
    match place(&ranking, hosts, capacity) {
        None => SplitDecision::Held(event),
        Some((target, redirected_from)) => {
            policy.advance(hosts.len());
            let redirect_latency = redirected_from.map(|_| redirect.latency(&event));
            SplitDecision::Routed(RoutedEvent {
                event,
                target_host: target,
                redirected_from,
                redirect_latency,
            })
        }
    }
}

/// Copies a replicated-stream event to every host.
pub fn replicate(event: &PrimitiveEvent, m: usize) -> Result<Vec<RoutedEvent>, RuntimeError> {
    if m == 0 {
        return Err(RuntimeError::InvalidConfig("m must be at least 1".into()));
    }
    Ok((0..m)
        .map(|h| RoutedEvent {
            event: event.clone(),
            target_host: h,
            redirected_from: None,
            redirect_latency: None,
        })
        .collect())
}

/// Forwards all worker outputs. In deterministic mode the result is sorted
/// by end timestamp, then constituent timestamps.
pub fn merge(outputs: Vec<Vec<CompositeEvent>>, deterministic: bool) -> Vec<CompositeEvent> {
    let mut all: Vec<CompositeEvent> = outputs.into_iter().flatten().collect();
    if deterministic {
        all.sort_unstable_by(CompositeEvent::order_cmp);
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{compose, make_primitive, EventType};
    use crate::policy::PolicyKind;

    fn ev(ts: Micros) -> PrimitiveEvent {
        make_primitive(EventType::new("E2").unwrap(), ts, vec![]).unwrap()
    }

    fn hosts(queues: &[usize]) -> Vec<HostState> {
        queues
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                let mut h = HostState::new(i, 100.0, 8);
                h.queue_len = q;
                h
            })
            .collect()
    }

    fn target(d: SplitDecision) -> RoutedEvent {
        match d {
            SplitDecision::Routed(r) => r,
            SplitDecision::Held(_) => panic!("event was held"),
        }
    }

    #[test]
    fn round_robin_cycles() {
        let hs = hosts(&[0, 0, 0]);
        let mut p = SplittingPolicy::new(PolicyKind::RoundRobin);
        let r = RedirectModel::default();
        let got: Vec<_> = (0..4)
            .map(|i| target(split(i, ev(i), &mut p, &hs, 10, &r)).target_host)
            .collect();
        assert_eq!(got, vec![0, 1, 2, 0]);
    }

    #[test]
    fn jsq_picks_shortest_and_stamps_arrival() {
        let mut p = SplittingPolicy::new(PolicyKind::ShortestQueue);
        let r = target(split(42, ev(40), &mut p, &hosts(&[5, 2, 9]), 10, &RedirectModel::default()));
        assert_eq!(r.target_host, 1);
        assert_eq!(r.event.arrival_ts(), Some(42));
        assert_eq!((r.redirected_from, r.redirect_latency), (None, None));
    }

    #[test]
    fn full_target_redirects() {
        let mut p = SplittingPolicy::with_cursor(PolicyKind::RoundRobin, 0);
        let model = RedirectModel { base_us: 500, per_byte_us: 0.0 };
        let r = target(split(0, ev(0), &mut p, &hosts(&[2, 2, 0]), 2, &model));
        assert_eq!(r.target_host, 2);
        assert_eq!(r.redirected_from, Some(0));
        assert_eq!(r.redirect_latency, Some(500));
    }

    #[test]
    fn all_full_holds_event() {
        let mut p = SplittingPolicy::new(PolicyKind::ShortestQueue);
        let d = split(7, ev(7), &mut p, &hosts(&[2, 2]), 2, &RedirectModel::default());
        match d {
            SplitDecision::Held(e) => assert_eq!(e.arrival_ts(), Some(7)),
            other => panic!("expected hold, got {other:?}"),
        }
    }

    #[test]
    fn replicate_fans_out() {
        let e = ev(3);
        let copies = replicate(&e, 3).unwrap();
        assert_eq!(copies.iter().map(|r| r.target_host).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(copies.iter().all(|r| r.event == e));
        assert_eq!(replicate(&e, 1).unwrap().len(), 1);
        assert!(replicate(&e, 0).is_err());
    }

    #[test]
    fn merge_forwards_everything() {
        let ty = EventType::new("OUT").unwrap();
        let c1 = compose(ty.clone(), vec![ev(5)]).unwrap();
        let c2 = compose(ty, vec![ev(1)]).unwrap();
        let out = merge(vec![vec![c1.clone()], vec![c2.clone()]], true);
        assert_eq!(out, vec![c2, c1]);
        assert!(merge(vec![vec![], vec![]], true).is_empty());
    }
}

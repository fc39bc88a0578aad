//! Per-worker buffer of replicated events inside the trailing window.

use std::collections::{HashMap, VecDeque};

use crate::event::{EventType, Micros, PrimitiveEvent, Value};

#[derive(Debug, Default)]
struct TypeBuffer {
    events: VecDeque<PrimitiveEvent>,
    /// Sequence number of `events[0]`.
    base: u64,
    /// Per key value, sequence numbers in timestamp order.
    by_key: HashMap<Value, VecDeque<u64>>,
}

impl TypeBuffer {
    fn get(&self, seq: u64) -> &PrimitiveEvent {
        &self.events[(seq - self.base) as usize]
    }

    fn range_in(&self, seqs: &VecDeque<u64>, lo: Micros, hi: Micros) -> (usize, usize) {
        let a = seqs.partition_point(|&s| self.get(s).start_ts() < lo);
        let b = seqs.partition_point(|&s| self.get(s).start_ts() <= hi);
        (a, b.max(a))
    }

    fn range_all(&self, lo: Micros, hi: Micros) -> (usize, usize) {
        let a = self.events.partition_point(|e| e.start_ts() < lo);
        let b = self.events.partition_point(|e| e.start_ts() <= hi);
        (a, b.max(a))
    }
}

/// Replica buffer indexed by type and, when the query has a key, by key.
#[derive(Debug)]
pub struct ReplicaBuffer {
    key: Option<String>,
    types: HashMap<EventType, TypeBuffer>,
    len: usize,
    bytes: u64,
}

impl ReplicaBuffer {
    pub fn new(key: Option<String>) -> Self {
        Self {
            key,
            types: HashMap::new(),
            len: 0,
            bytes: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    /// Appends an event. Events of one type must arrive in timestamp order.
    pub fn insert(&mut self, event: PrimitiveEvent) {
        let buf = self.types.entry(event.event_type.clone()).or_default();
        debug_assert!(buf
            .events
            .back()
            .is_none_or(|last| last.start_ts() <= event.start_ts()));
        let seq = buf.base + buf.events.len() as u64;
        if let Some(k) = &self.key {
            if let Some(v) = event.attribute(k) {
                buf.by_key.entry(v.clone()).or_default().push_back(seq);
            }
        }
        self.len += 1;
        self.bytes += event.size_bytes() as u64;
        buf.events.push_back(event);
    }

    /// Drops events that start before `cutoff`.
    pub fn evict_before(&mut self, cutoff: Micros) {
        let key = self.key.as_deref();
        for buf in self.types.values_mut() {
            while buf.events.front().is_some_and(|e| e.start_ts() < cutoff) {
                let e = buf.events.pop_front().expect("front exists");
                if let Some(v) = key.and_then(|k| e.attribute(k)) {
                    let list = buf.by_key.get_mut(v).expect("indexed key");
                    debug_assert_eq!(list.front(), Some(&buf.base));
                    list.pop_front();
                    if list.is_empty() {
                        buf.by_key.remove(v);
                    }
                }
                buf.base += 1;
                self.len -= 1;
                self.bytes -= e.size_bytes() as u64;
            }
        }
    }

    /// Events of `ty` starting in `[lo, hi]`, restricted to `key` when the
    /// buffer is keyed and a key is given.
    pub fn candidates(&self, ty: &EventType, key: Option<&Value>, lo: Micros, hi: Micros) -> Vec<&PrimitiveEvent> {
        let Some(buf) = self.types.get(ty) else {
            return Vec::new();
        };
        match (self.key.is_some(), key) {
            (true, Some(v)) => match buf.by_key.get(v) {
                Some(seqs) => {
                    let (a, b) = buf.range_in(seqs, lo, hi);
                    seqs.range(a..b).map(|&s| buf.get(s)).collect()
                }
                None => Vec::new(),
            },
            _ => {
                let (a, b) = buf.range_all(lo, hi);
                buf.events.range(a..b).collect()
            }
        }
    }

    /// Number of events `candidates` would return, in O(log n).
    pub fn count(&self, ty: &EventType, key: Option<&Value>, lo: Micros, hi: Micros) -> usize {
        let Some(buf) = self.types.get(ty) else {
            return 0;
        };
        match (self.key.is_some(), key) {
            (true, Some(v)) => buf.by_key.get(v).map_or(0, |seqs| {
                let (a, b) = buf.range_in(seqs, lo, hi);
                b - a
            }),
            _ => {
                let (a, b) = buf.range_all(lo, hi);
                b - a
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::make_primitive;
    use std::sync::Arc;

    fn ev(ts: Micros, key: i64) -> PrimitiveEvent {
        make_primitive(EventType::new("E1").unwrap(), ts, vec![(Arc::from("Id"), Value::Int(key))]).unwrap()
    }

    #[test]
    fn keyed_ranges_and_eviction() {
        let ty = EventType::new("E1").unwrap();
        let mut b = ReplicaBuffer::new(Some("Id".into()));
        for (ts, k) in [(10, 1), (20, 2), (30, 1), (40, 1), (50, 2)] {
            b.insert(ev(ts, k));
        }
        assert_eq!(b.len(), 5);
        let one = Value::Int(1);
        assert_eq!(b.count(&ty, Some(&one), 0, 100), 3);
        assert_eq!(b.count(&ty, Some(&one), 15, 40), 2);
        let ts: Vec<_> = b.candidates(&ty, Some(&one), 15, 40).iter().map(|e| e.start_ts()).collect();
        assert_eq!(ts, vec![30, 40]);
        assert_eq!(b.count(&ty, None, 20, 50), 4);

        b.evict_before(31);
        assert_eq!(b.len(), 2);
        assert_eq!(b.count(&ty, Some(&one), 0, 100), 1);
        assert_eq!(b.count(&ty, Some(&Value::Int(2)), 0, 100), 1);
        assert_eq!(b.count(&ty, Some(&Value::Int(9)), 0, 100), 0);
        b.evict_before(1_000);
        assert!(b.is_empty());
        assert_eq!(b.bytes(), 0);
    }
}

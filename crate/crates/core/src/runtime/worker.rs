//! The process operator: evaluates the pattern for each partitioned event
//! against the worker-local replica buffer.

use std::sync::Arc;

use crate::event::{CompositeEvent, EventType, Micros, PrimitiveEvent};
use crate::query::{AnchoredMatcher, PatternExpr, PatternQuery};

/// Inputs to a service-time model for one partitioned event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WorkSize {
    /// Replica events held by the worker.
    pub buffer_len: usize,
    /// Replica events inside the trigger's window that share its key.
    pub candidates: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub count: usize,
    /// Materialized matches; empty when evaluation ran in counting mode.
    pub matches: Vec<CompositeEvent>,
}

#[derive(Debug, Clone, Copy)]
enum PairShape {
    Seq,
    And,
}

#[derive(Debug)]
pub struct PatternWorker {
    query: Arc<PatternQuery>,
    replicated: Vec<EventType>,
    buffer: super::ReplicaBuffer,
    pair: Option<PairShape>,
}

impl PatternWorker {
    pub fn new(query: Arc<PatternQuery>) -> Self {
        let pair = match &query.pattern {
            PatternExpr::Seq(l, r) if matches!((&**l, &**r), (PatternExpr::Leaf(_), PatternExpr::Leaf(_))) => {
                Some(PairShape::Seq)
            }
            PatternExpr::And(l, r) if matches!((&**l, &**r), (PatternExpr::Leaf(_), PatternExpr::Leaf(_))) => {
                Some(PairShape::And)
            }
            _ => None,
        };
        Self {
            replicated: query.replicated_types(),
            buffer: super::ReplicaBuffer::new(query.where_key.clone()),
            query,
            pair,
        }
    }

    pub fn query(&self) -> &PatternQuery {
        &self.query
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn buffer_bytes(&self) -> u64 {
        self.buffer.bytes()
    }

    pub fn insert_replica(&mut self, event: PrimitiveEvent) {
        self.buffer.insert(event);
    }

    /// Evicts replica events that can no longer match any trigger starting
    /// at or after `oldest_trigger_ts`.
    pub fn evict_for(&mut self, oldest_trigger_ts: Micros) {
        self.buffer.evict_before(oldest_trigger_ts - self.query.window);
    }

    fn key_of<'a>(&self, trigger: &'a PrimitiveEvent) -> Result<Option<&'a crate::event::Value>, ()> {
        match &self.query.where_key {
            None => Ok(None),
            Some(k) => trigger.attribute(k).map(Some).ok_or(()),
        }
    }

    fn span(&self, trigger: &PrimitiveEvent) -> (Micros, Micros) {
        let t = trigger.start_ts();
        (t - self.query.window, t + self.query.lookahead())
    }

    pub fn work_size(&self, trigger: &PrimitiveEvent) -> WorkSize {
        let candidates = match self.key_of(trigger) {
            Err(()) => 0,
            Ok(key) => {
                let (lo, hi) = self.span(trigger);
                self.replicated
                    .iter()
                    .map(|ty| self.buffer.count(ty, key, lo, hi))
                    .sum()
            }
        };
        WorkSize {
            buffer_len: self.buffer.len(),
            candidates,
        }
    }

    /// Finds every match whose partitioned constituent is `trigger`.
    ///
    /// The buffer must already hold every replica event up to
    /// `trigger.ts + lookahead`. With `collect == false`, two-leaf patterns
    /// are counted without enumerating matches.
    pub fn evaluate(&self, trigger: &PrimitiveEvent, collect: bool) -> Evaluation {
        let Ok(key) = self.key_of(trigger) else {
            return Evaluation::default();
        };
        let t = trigger.start_ts();
        let w = self.query.window;
        if let (false, Some(shape)) = (collect, self.pair) {
            let (lo, hi) = match shape {
                PairShape::Seq => (t - w, t - 1),
                PairShape::And => (t - w, t + w),
            };
            let count = self.buffer.count(&self.replicated[0], key, lo, hi);
            return Evaluation {
                count,
                matches: Vec::new(),
            };
        }
        let (lo, hi) = self.span(trigger);
        let candidates: Vec<Vec<&PrimitiveEvent>> = self
            .replicated
            .iter()
            .map(|ty| self.buffer.candidates(ty, key, lo, hi))
            .collect();
        let matcher = AnchoredMatcher::new(&self.query);
        if collect {
            let matches = matcher.matches(trigger, &candidates);
            Evaluation {
                count: matches.len(),
                matches,
            }
        } else {
            let count = matcher.count(trigger, &candidates);
            Evaluation {
                count,
                matches: Vec::new(),
            }
        }
    }
}

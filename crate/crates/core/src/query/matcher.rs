//! SEQ / AND semantics and the single-operator reference evaluator.
//!
//! Match rules:
//! - `SEQ(l, r)`: every constituent of `l` ends strictly before every
//!   constituent of `r` starts (`l.et < r.st`; for primitives this is
//!   `l.st < r.st`).
//! - `AND(l, r)`: no ordering constraint; simultaneous events allowed.
//! - The whole match spans at most the window: `max(et) - min(st) <= window`.
//! - With `WHERE [key]`, all constituents carry the key with one shared value.
//!
//! Every qualifying combination is reported.

use crate::event::{compose, CompositeEvent, Micros, PrimitiveEvent, Value};

use super::ast::{PatternExpr, PatternQuery};

fn keys_agree(query: &PatternQuery, a: &PrimitiveEvent, b: &PrimitiveEvent) -> bool {
    match &query.where_key {
        None => true,
        Some(k) => match (a.attribute(k), b.attribute(k)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}

fn span_fits(query: &PatternQuery, a: &PrimitiveEvent, b: &PrimitiveEvent) -> bool {
    a.end_ts().max(b.end_ts()) - a.start_ts().min(b.start_ts()) <= query.window
}

/// `SEQ(e_i, e_j)`: `e_i` strictly precedes `e_j`, within the window, keys equal.
pub fn seq_match(e_i: &PrimitiveEvent, e_j: &PrimitiveEvent, query: &PatternQuery) -> bool {
    e_i.start_ts() < e_j.start_ts() && span_fits(query, e_i, e_j) && keys_agree(query, e_i, e_j)
}

/// `AND(e_i, e_j)`: within the window and keys equal, in either order.
pub fn and_match(e_i: &PrimitiveEvent, e_j: &PrimitiveEvent, query: &PatternQuery) -> bool {
    span_fits(query, e_i, e_j) && keys_agree(query, e_i, e_j)
}

/// A multiset of matches in deterministic order (lexicographic by
/// constituent timestamps, then ids).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchSet {
    pub matches: Vec<CompositeEvent>,
}

impl MatchSet {
    pub fn from_unsorted(mut matches: Vec<CompositeEvent>) -> Self {
        matches.sort_unstable_by(|a, b| a.constituent_keys().cmp(b.constituent_keys()));
        Self { matches }
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Constituent ids of each match, in set order.
    pub fn id_tuples(&self) -> Vec<Vec<u64>> {
        self.matches
            .iter()
            .map(|m| m.constituents.iter().map(|c| c.id).collect())
            .collect()
    }
}

struct Partial<'a> {
    events: Vec<&'a PrimitiveEvent>,
    min_st: Micros,
    max_et: Micros,
    key: Option<&'a Value>,
}

fn eval_node<'a>(
    node: &PatternExpr,
    query: &PatternQuery,
    stream: &'a [PrimitiveEvent],
) -> Vec<Partial<'a>> {
    match node {
        PatternExpr::Leaf(ty) => stream
            .iter()
            .filter(|e| &e.event_type == ty)
            .filter_map(|e| {
                let key = match &query.where_key {
                    Some(k) => Some(e.attribute(k)?),
                    None => None,
                };
                Some(Partial {
                    events: vec![e],
                    min_st: e.start_ts(),
                    max_et: e.end_ts(),
                    key,
                })
            })
            .collect(),
        PatternExpr::Seq(l, r) | PatternExpr::And(l, r) => {
            let ordered = matches!(node, PatternExpr::Seq(..));
            let left = eval_node(l, query, stream);
            let right = eval_node(r, query, stream);
            let mut out = Vec::new();
            for a in &left {
                for b in &right {
                    if ordered && a.max_et >= b.min_st {
                        continue;
                    }
                    let min_st = a.min_st.min(b.min_st);
                    let max_et = a.max_et.max(b.max_et);
                    if max_et - min_st > query.window || a.key != b.key {
                        continue;
                    }
                    let mut events = a.events.clone();
                    events.extend_from_slice(&b.events);
                    out.push(Partial {
                        events,
                        min_st,
                        max_et,
                        key: a.key,
                    });
                }
            }
            out
        }
    }
}

/// Evaluates `query` over a whole stream with a single operator, returning
/// every match. Constituents are listed in pattern leaf order.
pub fn reference_evaluate(query: &PatternQuery, stream: &[PrimitiveEvent]) -> MatchSet {
    let out_type = query.output_type();
    let matches = eval_node(&query.pattern, query, stream)
        .into_iter()
        .map(|p| {
            compose(out_type.clone(), p.events.into_iter().cloned().collect())
                .expect("partials are non-empty")
        })
        .collect();
    MatchSet::from_unsorted(matches)
}

/// Checks a complete leaf assignment (in leaf order) against the pattern
/// tree. Returns the assignment's `(min start, max end)` when the ordering
/// constraints hold; window and key are checked by the caller.
fn tree_bounds(node: &PatternExpr, assignment: &[&PrimitiveEvent], cursor: &mut usize) -> Option<(Micros, Micros)> {
    match node {
        PatternExpr::Leaf(_) => {
            let e = assignment[*cursor];
            *cursor += 1;
            Some((e.start_ts(), e.end_ts()))
        }
        PatternExpr::Seq(l, r) => {
            let a = tree_bounds(l, assignment, cursor)?;
            let b = tree_bounds(r, assignment, cursor)?;
            (a.1 < b.0).then_some((a.0.min(b.0), a.1.max(b.1)))
        }
        PatternExpr::And(l, r) => {
            let a = tree_bounds(l, assignment, cursor)?;
            let b = tree_bounds(r, assignment, cursor)?;
            Some((a.0.min(b.0), a.1.max(b.1)))
        }
    }
}

/// Matches that contain one fixed event in the rightmost leaf.
///
/// `candidates[k]` lists the events eligible for leaf `k` (all leaves but the
/// last); the trigger fills the last leaf. Combinations are enumerated with
/// window/key pruning and checked against the tree.
pub struct AnchoredMatcher<'q> {
    query: &'q PatternQuery,
    leaves: usize,
}

impl<'q> AnchoredMatcher<'q> {
    pub fn new(query: &'q PatternQuery) -> Self {
        Self {
            query,
            leaves: query.pattern.leaf_count(),
        }
    }

    /// Calls `emit` for every match containing `trigger`.
    pub fn for_each<'e>(
        &self,
        trigger: &'e PrimitiveEvent,
        candidates: &[Vec<&'e PrimitiveEvent>],
        mut emit: impl FnMut(&[&'e PrimitiveEvent]),
    ) {
        debug_assert_eq!(candidates.len() + 1, self.leaves);
        let trigger_key = match &self.query.where_key {
            Some(k) => match trigger.attribute(k) {
                Some(v) => Some(v),
                None => return,
            },
            None => None,
        };
        let mut assignment: Vec<&PrimitiveEvent> = Vec::with_capacity(self.leaves);
        self.descend(
            trigger,
            trigger_key,
            candidates,
            &mut assignment,
            trigger.start_ts(),
            trigger.end_ts(),
            &mut emit,
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn descend<'e>(
        &self,
        trigger: &'e PrimitiveEvent,
        key: Option<&Value>,
        candidates: &[Vec<&'e PrimitiveEvent>],
        assignment: &mut Vec<&'e PrimitiveEvent>,
        min_st: Micros,
        max_et: Micros,
        emit: &mut impl FnMut(&[&'e PrimitiveEvent]),
    ) {
        let depth = assignment.len();
        if depth == candidates.len() {
            assignment.push(trigger);
            let mut cursor = 0;
            if tree_bounds(&self.query.pattern, assignment, &mut cursor).is_some() {
                emit(assignment);
            }
            assignment.pop();
            return;
        }
        for &c in &candidates[depth] {
            let lo = min_st.min(c.start_ts());
            let hi = max_et.max(c.end_ts());
            if hi - lo > self.query.window {
                continue;
            }
            if let (Some(k), Some(want)) = (&self.query.where_key, key) {
                if c.attribute(k) != Some(want) {
                    continue;
                }
            }
            assignment.push(c);
            self.descend(trigger, key, candidates, assignment, lo, hi, emit);
            assignment.pop();
        }
    }

    /// Materialized matches containing `trigger`.
    pub fn matches(
        &self,
        trigger: &PrimitiveEvent,
        candidates: &[Vec<&PrimitiveEvent>],
    ) -> Vec<CompositeEvent> {
        let out_type = self.query.output_type();
        let mut out = Vec::new();
        self.for_each(trigger, candidates, |tuple| {
            out.push(
                compose(out_type.clone(), tuple.iter().map(|e| (*e).clone()).collect())
                    .expect("tuples are non-empty"),
            );
        });
        out
    }

    pub fn count(&self, trigger: &PrimitiveEvent, candidates: &[Vec<&PrimitiveEvent>]) -> usize {
        let mut n = 0;
        self.for_each(trigger, candidates, |_| n += 1);
        n
    }
}

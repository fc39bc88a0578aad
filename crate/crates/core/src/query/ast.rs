use std::fmt;

use crate::event::{EventType, Micros, MICROS_PER_SECOND};

/// Pattern operator tree. `Seq` and `And` are strictly binary.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternExpr {
    Leaf(EventType),
    Seq(Box<PatternExpr>, Box<PatternExpr>),
    And(Box<PatternExpr>, Box<PatternExpr>),
}

impl PatternExpr {
    pub fn leaf(name: &str) -> Self {
        PatternExpr::Leaf(EventType::new(name).expect("non-empty leaf name"))
    }

    pub fn seq(left: PatternExpr, right: PatternExpr) -> Self {
        PatternExpr::Seq(Box::new(left), Box::new(right))
    }

    pub fn and(left: PatternExpr, right: PatternExpr) -> Self {
        PatternExpr::And(Box::new(left), Box::new(right))
    }

    /// Leaf types, left to right.
    pub fn leaves(&self) -> Vec<EventType> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<EventType>) {
        match self {
            PatternExpr::Leaf(t) => out.push(t.clone()),
            PatternExpr::Seq(l, r) | PatternExpr::And(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            PatternExpr::Leaf(_) => 1,
            PatternExpr::Seq(l, r) | PatternExpr::And(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    /// True when the rightmost leaf is reached through `Seq` nodes only, so
    /// its event always starts after every other constituent of a match.
    pub fn rightmost_is_last(&self) -> bool {
        match self {
            PatternExpr::Leaf(_) => true,
            PatternExpr::Seq(_, r) => r.rightmost_is_last(),
            PatternExpr::And(..) => false,
        }
    }
}

impl fmt::Display for PatternExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternExpr::Leaf(t) => write!(f, "{t}"),
            PatternExpr::Seq(l, r) => write!(f, "SEQ({l}, {r})"),
            PatternExpr::And(l, r) => write!(f, "AND({l}, {r})"),
        }
    }
}

/// A parsed `PATTERN ... [WHERE [key]] WITHIN ...` query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatternQuery {
    pub pattern: PatternExpr,
    /// Attribute whose value must be equal across all constituents.
    pub where_key: Option<String>,
    /// Maximum span `max(end_ts) - min(start_ts)` of a match.
    pub window: Micros,
}

impl PatternQuery {
    pub fn new(pattern: PatternExpr, where_key: Option<&str>, window: Micros) -> Self {
        Self {
            pattern,
            where_key: where_key.map(str::to_string),
            window,
        }
    }

    /// The stream that is split across workers; all other leaf streams are
    /// replicated. This is the rightmost leaf.
    pub fn partitioned_type(&self) -> EventType {
        self.pattern
            .leaves()
            .pop()
            .expect("a pattern has at least one leaf")
    }

    /// Event types that are replicated to every worker.
    pub fn replicated_types(&self) -> Vec<EventType> {
        let mut leaves = self.pattern.leaves();
        leaves.pop();
        leaves
    }

    /// How far past a trigger's timestamp a worker must wait before the
    /// trigger's matches are complete.
    pub fn lookahead(&self) -> Micros {
        if self.pattern.rightmost_is_last() {
            0
        } else {
            self.window
        }
    }

    pub fn output_type(&self) -> EventType {
        let name: String = self.pattern.to_string().chars().filter(|c| !c.is_whitespace()).collect();
        EventType::new(&name).expect("pattern text is non-empty")
    }
}

pub(crate) fn format_window(us: Micros) -> String {
    if us % MICROS_PER_SECOND == 0 {
        format!("{} s", us / MICROS_PER_SECOND)
    } else if us % 1_000 == 0 {
        format!("{} ms", us / 1_000)
    } else {
        format!("{us} us")
    }
}

impl fmt::Display for PatternQuery {
    /// Canonical query text; parses back to an equal query.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PATTERN {}", self.pattern)?;
        if let Some(key) = &self.where_key {
            write!(f, " WHERE [{key}]")?;
        }
        write!(f, " WITHIN {}", format_window(self.window))
    }
}

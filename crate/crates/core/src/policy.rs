//! Event-splitting policies: round-robin, join-the-shortest-queue and
//! least-loaded-server-first.
//!
//! All ties go to the lowest host id.

use std::fmt;
use std::str::FromStr;

use crate::runtime::HostState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    RoundRobin,
    ShortestQueue,
    LeastLoaded,
}

impl PolicyKind {
    /// Candidate order; also the tie-break order for adaptive selection.
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::RoundRobin,
        PolicyKind::ShortestQueue,
        PolicyKind::LeastLoaded,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::RoundRobin => "RR",
            PolicyKind::ShortestQueue => "JSQ",
            PolicyKind::LeastLoaded => "LLSF",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rr" | "round-robin" => Ok(PolicyKind::RoundRobin),
            "jsq" => Ok(PolicyKind::ShortestQueue),
            "llsf" => Ok(PolicyKind::LeastLoaded),
            other => Err(format!("unknown policy {other:?}")),
        }
    }
}

/// Host indices ordered best first; always a permutation of `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRanking(pub Vec<usize>);

impl PolicyRanking {
    pub fn first(&self) -> usize {
        self.0[0]
    }

    pub fn hosts(&self) -> &[usize] {
        &self.0
    }
}

/// A splitting policy plus its round-robin cursor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplittingPolicy {
    pub kind: PolicyKind,
    rr_cursor: usize,
}

impl SplittingPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, rr_cursor: 0 }
    }

    pub fn with_cursor(kind: PolicyKind, rr_cursor: usize) -> Self {
        Self { kind, rr_cursor }
    }

    pub fn cursor(&self) -> usize {
        self.rr_cursor
    }

    /// Ranks hosts without changing any state.
    pub fn rank_hosts(&self, hosts: &[HostState]) -> PolicyRanking {
        let m = hosts.len();
        assert!(m > 0, "ranking needs at least one host");
        let mut order: Vec<usize> = (0..m).collect();
        match self.kind {
            PolicyKind::RoundRobin => order.rotate_left(self.rr_cursor % m),
            // Stable sorts keep lower ids first among equals.
            PolicyKind::ShortestQueue => order.sort_by_key(|&i| hosts[i].queue_len),
            PolicyKind::LeastLoaded => order.sort_by_key(|&i| hosts[i].mem_load),
        }
        PolicyRanking(order)
    }

    /// Advances the round-robin cursor past one partitioned event.
    pub fn advance(&mut self, m: usize) {
        if self.kind == PolicyKind::RoundRobin {
            self.rr_cursor = (self.rr_cursor + 1) % m;
        }
    }
}

//! Expected waiting time per policy and the argmin choice.

use std::cmp::Ordering;

use crate::policy::PolicyKind;
use crate::runtime::HostState;

use super::histogram::AssignHistogram;
use super::queueing::kingman_wait;

/// `Σ_i (P^H_i E[W^H_i] + P^R_i E[W^R_i])`. Hosts a policy never uses do not
/// contribute, even when their own wait is infinite.
pub fn policy_expected_wait(ph: &[f64], pr: &[f64], host_waits: &[f64], redirect_waits: &[f64]) -> f64 {
    let term = |p: f64, w: f64| if p > 0.0 { p * w } else { 0.0 };
    (0..ph.len())
        .map(|i| term(ph[i], host_waits[i]) + term(pr[i], redirect_waits[i]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEstimate {
    /// Expected wait in seconds; infinite when some used host saturates.
    pub wait: f64,
    /// `Σ_i P^H_i ρ_i`, used to rank candidates that all saturate.
    pub load: f64,
}

/// Estimates `E[W_P]` for `policy` from its assignment shares and each
/// host's observed utilization and variability.
pub fn estimate_policy_wait(hist: &AssignHistogram, hosts: &[HostState], policy: PolicyKind) -> Option<PolicyEstimate> {
    let (ph, pr) = hist.probabilities(policy)?;
    let mut load = 0.0;
    let host_waits: Vec<f64> = hosts
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let rho = h.utilization().unwrap_or(0.0);
            load += ph[i] * rho;
            kingman_wait(rho, h.service_rate, h.c2_arrival(), h.c2_service()).unwrap_or(f64::INFINITY)
        })
        .collect();
    let redirect_waits: Vec<f64> = (0..hosts.len()).map(|i| hist.expected_redirect_time(i) / 1e6).collect();
    Some(PolicyEstimate {
        wait: policy_expected_wait(&ph, &pr, &host_waits, &redirect_waits),
        load,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub chosen: PolicyKind,
    /// Expected wait per candidate, seconds; `None` without observations.
    pub waits: Vec<(PolicyKind, Option<f64>)>,
    pub epoch: usize,
}

fn compare(a: &PolicyEstimate, b: &PolicyEstimate) -> Ordering {
    a.wait
        .total_cmp(&b.wait)
        .then_with(|| a.load.total_cmp(&b.load))
}

/// Candidate with the least expected wait. Ties go to the earlier policy in
/// `PolicyKind::ALL` order; among saturated candidates the one with the
/// lowest weighted utilization wins. Without any estimate, round-robin.
pub fn select_policy(candidates: &[(PolicyKind, Option<PolicyEstimate>)], epoch: usize) -> PolicyDecision {
    let mut best: Option<(PolicyKind, PolicyEstimate)> = None;
    for kind in PolicyKind::ALL {
        let Some((_, Some(est))) = candidates.iter().find(|(k, _)| *k == kind) else {
            continue;
        };
        if best.is_none_or(|(_, b)| compare(est, &b) == Ordering::Less) {
            best = Some((kind, *est));
        }
    }
    PolicyDecision {
        chosen: best.map_or(PolicyKind::RoundRobin, |(k, _)| k),
        waits: candidates.iter().map(|(k, e)| (*k, e.map(|e| e.wait))).collect(),
        epoch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn est(wait: f64) -> Option<PolicyEstimate> {
        Some(PolicyEstimate { wait, load: 0.5 })
    }

    #[test]
    fn weighted_sum_examples() {
        assert_eq!(policy_expected_wait(&[0.5, 0.5], &[0.0, 0.0], &[2.0, 4.0], &[10.0, 10.0]), 3.0);
        assert_eq!(policy_expected_wait(&[0.5, 0.5], &[0.1, 0.1], &[2.0, 4.0], &[10.0, 10.0]), 5.0);
        assert_eq!(
            policy_expected_wait(&[0.5, 0.5], &[0.0, 0.0], &[f64::INFINITY, 4.0], &[0.0, 0.0]),
            f64::INFINITY
        );
        assert_eq!(policy_expected_wait(&[0.0, 1.0], &[0.0, 0.0], &[f64::INFINITY, 4.0], &[0.0, 0.0]), 4.0);
    }

    #[test]
    fn argmin_examples() {
        use PolicyKind::*;
        let pick = |w: [Option<PolicyEstimate>; 3]| {
            select_policy(&[(RoundRobin, w[0]), (ShortestQueue, w[1]), (LeastLoaded, w[2])], 0).chosen
        };
        assert_eq!(pick([est(5.0), est(2.0), est(4.0)]), ShortestQueue);
        assert_eq!(pick([est(1.0), est(1.0), est(1.0)]), RoundRobin);
        assert_eq!(pick([est(3.0), est(f64::INFINITY), est(2.0)]), LeastLoaded);
        assert_eq!(pick([None, None, None]), RoundRobin);
        assert_eq!(pick([None, est(9.0), None]), ShortestQueue);
        let sat = |r| Some(PolicyEstimate { wait: f64::INFINITY, load: r });
        assert_eq!(pick([sat(1.5), sat(1.2), sat(1.3)]), ShortestQueue);
    }

    #[test]
    fn estimate_uses_histogram_shares() {
        let mut hist = AssignHistogram::new(2, 8, 1000.0);
        for i in 0..4 {
            hist.record_assignment(PolicyKind::RoundRobin, i % 2, None);
            hist.record_assignment(PolicyKind::ShortestQueue, 0, None);
        }
        let mut hosts: Vec<_> = (0..2).map(|i| HostState::new(i, 10.0, 16)).collect();
        // Host 0 sees 5 ev/s (rho 0.5, C² 0 arrivals, 1 service): 0.05 s.
        // Host 1 sees nothing: no wait.
        for k in 0..10 {
            hosts[0].record_arrival(k * 200_000);
        }
        let rr = estimate_policy_wait(&hist, &hosts, PolicyKind::RoundRobin).unwrap();
        assert!((rr.wait - 0.025).abs() < 1e-12, "{rr:?}");
        assert!((rr.load - 0.25).abs() < 1e-12);
        let jsq = estimate_policy_wait(&hist, &hosts, PolicyKind::ShortestQueue).unwrap();
        assert!((jsq.wait - 0.05).abs() < 1e-12);
        for k in 0..20 {
            hosts[0].record_arrival(2_000_000 + k * 10_000);
        }
        let sat = estimate_policy_wait(&hist, &hosts, PolicyKind::ShortestQueue).unwrap();
        assert!(sat.wait.is_infinite(), "{sat:?}");
        assert!(estimate_policy_wait(&hist, &hosts, PolicyKind::LeastLoaded).is_none());
    }

    proptest! {
        #[test]
        fn scaling_keeps_choice(w in proptest::collection::vec(0.001..100.0f64, 3), k in 0.01..100.0f64) {
            let make = |s: f64| -> Vec<(PolicyKind, Option<PolicyEstimate>)> {
                PolicyKind::ALL.iter().zip(&w).map(|(p, &x)| (*p, est(x * s))).collect()
            };
            prop_assert_eq!(select_policy(&make(1.0), 0).chosen, select_policy(&make(k), 0).chosen);
        }

        #[test]
        fn chosen_is_minimal(w in proptest::collection::vec(0.0..10.0f64, 3)) {
            let c: Vec<_> = PolicyKind::ALL.iter().zip(&w).map(|(p, &x)| (*p, est(x))).collect();
            let d = select_policy(&c, 3);
            let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let chosen = w[PolicyKind::ALL.iter().position(|&p| p == d.chosen).unwrap()];
            prop_assert_eq!(chosen, min);
            prop_assert_eq!(d.epoch, 3);
        }
    }
}

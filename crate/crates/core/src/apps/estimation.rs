//! Estimation error and the choice of segment shape `(q, ℓ)`.
//!
//! The history is a sequence of per-batch expected waits. A segment is `q`
//! consecutive batches and its value is their mean. The decision applied
//! to segment ν is estimated from segment ν−1−ℓ; the error is measured
//! against segment ν−1, the freshest data available.

use super::sizing::{batch_size, SizingParams};

/// Mean squared error between lag-ℓ estimates and the nearest segment, or
/// `None` when `q` does not divide the history or too few segments exist.
pub fn estimation_mse(history: &[f64], q: usize, lag: usize) -> Option<f64> {
    if q == 0 || lag == 0 || history.len() % q != 0 {
        return None;
    }
    let segments: Vec<f64> = history
        .chunks(q)
        .map(|c| c.iter().sum::<f64>() / q as f64)
        .collect();
    let n = segments.len();
    if n < lag + 2 {
        return None;
    }
    let sum: f64 = (lag + 2..=n)
        .map(|nu| {
            let estimate = segments[nu - 2 - lag];
            let nearest = segments[nu - 2];
            (estimate - nearest).powi(2)
        })
        .sum();
    Some(sum / (n - lag - 1) as f64)
}

/// Timings for one batch partition, in µs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimingStats {
    /// Mean time to process a batch.
    pub t_ps_batch: f64,
    /// Mean time to redirect one event.
    pub t_rd: f64,
    /// Mean time to run the estimator for a batch.
    pub t_es_batch: f64,
    pub c2_a: f64,
    pub c2_s: f64,
}

impl TimingStats {
    /// Processing time of a segment of `q` batches.
    pub fn segment_time(&self, q: usize) -> f64 {
        q as f64 * self.t_ps_batch + (q as f64 - 1.0) * self.t_rd
    }

    /// The estimate must finish within the time `m` workers spend on the
    /// previous `lag` segments.
    pub fn lag_covers_estimate(&self, q: usize, lag: usize, m: usize) -> bool {
        lag as f64 * self.segment_time(q) / m as f64 > q as f64 * self.t_es_batch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffSolution {
    /// Batches per segment.
    pub q: usize,
    /// Segments between the data used and the segment it is applied to.
    pub lag: usize,
    pub mse: Option<f64>,
    /// No pair met the constraints.
    pub fallback: bool,
}

/// Batches per epoch: `τ / i`, at least 1.
pub fn batches_per_epoch(p: &SizingParams) -> usize {
    (p.tau / batch_size(p)).max(1)
}

/// Minimizes `MSE / segment_time(q)` over `q | batches_per_epoch` and
/// `1 ≤ ℓ ≤ τ`, subject to `MSE < β` and [`TimingStats::lag_covers_estimate`].
/// Ties prefer the smaller `ℓ`, then the smaller `q`. Uses the most recent
/// epoch of `history`.
pub fn tradeoff_solve(stats: &TimingStats, p: &SizingParams, m: usize, history: &[f64]) -> TradeoffSolution {
    let nb = batches_per_epoch(p);
    let recent = &history[history.len().saturating_sub(nb)..];
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for q in (1..=nb).filter(|q| nb % q == 0) {
        let seg = stats.segment_time(q);
        if !(seg > 0.0) {
            continue;
        }
        for lag in 1..=p.tau {
            let Some(mse) = estimation_mse(recent, q, lag) else {
                // Larger lags only shrink the usable range further.
                break;
            };
            if !(mse < p.beta) || !stats.lag_covers_estimate(q, lag, m.max(1)) {
                continue;
            }
            let objective = mse / seg;
            let better = match best {
                None => true,
                Some((o, bl, bq, _)) => (objective, lag, q) < (o, bl, bq),
            };
            if better {
                best = Some((objective, lag, q, mse));
            }
        }
    }
    match best {
        Some((_, lag, q, mse)) => TradeoffSolution {
            q,
            lag,
            mse: Some(mse),
            fallback: false,
        },
        None => TradeoffSolution {
            q: nb,
            lag: 1,
            mse: None,
            fallback: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tau: usize, mu: f64) -> SizingParams {
        SizingParams {
            tau,
            ..SizingParams::new(100.0, mu, 1.0)
        }
    }

    #[test]
    fn constant_history_has_zero_error() {
        let h = vec![0.25; 12];
        for q in [1, 2, 3, 4] {
            for lag in 1..=12 / q - 2 {
                assert_eq!(estimation_mse(&h, q, lag), Some(0.0));
            }
        }
    }

    #[test]
    fn lag_one_beats_lag_three_on_a_ramp() {
        let h: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let one = estimation_mse(&h, 1, 1).unwrap();
        let three = estimation_mse(&h, 1, 3).unwrap();
        assert_eq!(one, 1.0);
        assert_eq!(three, 9.0);
    }

    #[test]
    fn degenerate_range_is_infeasible() {
        let h = vec![1.0; 6];
        // Three segments of two batches; lag 2 leaves no terms.
        assert!(estimation_mse(&h, 2, 2).is_none());
        assert!(estimation_mse(&h, 4, 1).is_none());
        assert!(estimation_mse(&h, 2, 1).is_some());
    }

    #[test]
    fn cheap_estimates_pick_lag_one() {
        let stats = TimingStats {
            t_ps_batch: 10_000.0,
            t_rd: 0.0,
            t_es_batch: 1.0,
            ..TimingStats::default()
        };
        let h: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let s = tradeoff_solve(&stats, &params(100, 10.0), 2, &h);
        assert!(!s.fallback);
        assert_eq!(s.lag, 1);
        assert!(stats.lag_covers_estimate(s.q, s.lag, 2));
    }

    #[test]
    fn expensive_estimates_fall_back() {
        let stats = TimingStats {
            t_ps_batch: 1.0,
            t_rd: 0.0,
            t_es_batch: 1e9,
            ..TimingStats::default()
        };
        let h = vec![1.0; 10];
        let s = tradeoff_solve(&stats, &params(100, 10.0), 2, &h);
        assert_eq!((s.q, s.lag, s.fallback), (10, 1, true));
    }

    #[test]
    fn equal_objectives_prefer_lower_lag_then_q() {
        let stats = TimingStats {
            t_ps_batch: 100.0,
            t_rd: 0.0,
            t_es_batch: 1.0,
            ..TimingStats::default()
        };
        let s = tradeoff_solve(&stats, &params(120, 10.0), 1, &[3.0; 12]);
        assert_eq!((s.q, s.lag, s.mse), (1, 1, Some(0.0)));
    }
}

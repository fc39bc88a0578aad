use super::AppsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizingParams {
    /// Arrival rate of the partitioned stream, events/s.
    pub lambda: f64,
    /// Per-worker service rate, events/s.
    pub mu: f64,
    /// Utilization threshold in (0, 1].
    pub delta: f64,
    /// Threshold on the estimation error.
    pub beta: f64,
    /// Events per adaptation epoch.
    pub tau: usize,
}

impl SizingParams {
    pub fn new(lambda: f64, mu: f64, delta: f64) -> Self {
        Self {
            lambda,
            mu,
            delta,
            beta: f64::INFINITY,
            tau: 1000,
        }
    }

    pub fn validate(&self) -> Result<(), AppsError> {
        let bad = |msg: &str| Err(AppsError::InvalidParams(msg.into()));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("delta must lie in (0, 1]");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if self.tau < 1 {
            return bad("tau must be at least 1");
        }
        Ok(())
    }
}

fn utilization(p: &SizingParams, m: usize) -> f64 {
    p.lambda / (m as f64 * p.mu)
}

/// Smallest worker count `m ≥ 1` with `λ / (m µ) ≤ δ`.
pub fn compute_parallel_degree(p: &SizingParams) -> Result<usize, AppsError> {
    p.validate()?;
    let estimate = (p.lambda / (p.mu * p.delta)).ceil();
    if !(estimate < 1e9) {
        return Err(AppsError::InvalidParams("parallel degree is unreasonably large".into()));
    }
    // The closed form can be off by one under rounding; settle on the exact
    // boundary with the same expression the constraint uses.
    let mut m = (estimate as usize).max(1);
    while m > 1 && utilization(p, m - 1) <= p.delta {
        m -= 1;
    }
    while utilization(p, m) > p.delta {
        m += 1;
    }
    Ok(m)
}

/// Events per batch partition: `⌊µ δ⌋`, at least 1.
pub fn batch_size(p: &SizingParams) -> usize {
    ((p.mu * p.delta).floor() as usize).max(1)
}

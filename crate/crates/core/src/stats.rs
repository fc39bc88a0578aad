//! Running and sliding-window moment accumulators.

use std::collections::VecDeque;

/// Mean/variance over the most recent `capacity` samples.
#[derive(Debug, Clone)]
pub struct WindowedStats {
    samples: VecDeque<f64>,
    capacity: usize,
    sum: f64,
    sum_sq: f64,
    // Pops since the sums were last rebuilt; bounds float drift.
    pops: usize,
}

impl WindowedStats {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self {
            samples: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
            sum: 0.0,
            sum_sq: 0.0,
            pops: 0,
        }
    }

    pub fn push(&mut self, x: f64) {
        if self.samples.len() == self.capacity {
            let old = self.samples.pop_front().expect("window is full");
            self.sum -= old;
            self.sum_sq -= old * old;
            self.pops += 1;
            if self.pops >= self.capacity {
                self.rebuild();
            }
        }
        self.samples.push_back(x);
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn rebuild(&mut self) {
        self.sum = self.samples.iter().sum();
        self.sum_sq = self.samples.iter().map(|x| x * x).sum();
        self.pops = 0;
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
        self.sum = 0.0;
        self.sum_sq = 0.0;
        self.pops = 0;
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.sum / self.samples.len() as f64)
    }

    /// Sample variance (n - 1 denominator); `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        let n = self.samples.len();
        if n < 2 {
            return None;
        }
        let mean = self.sum / n as f64;
        Some(((self.sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0))
    }

    /// Squared coefficient of variation, variance / mean².
    pub fn scv(&self) -> Option<f64> {
        let mean = self.mean()?;
        if mean <= 0.0 {
            return None;
        }
        Some(self.variance()? / (mean * mean))
    }
}

/// Welford accumulator over all samples.
#[derive(Debug, Clone, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    pub fn variance(&self) -> Option<f64> {
        (self.n > 1).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn scv(&self) -> Option<f64> {
        let mean = self.mean()?;
        (mean > 0.0).then(|| self.variance().map(|v| v / (mean * mean)))?
    }
}

/// Linear-interpolated quantile of an unsorted sample (`q` in [0, 1]).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

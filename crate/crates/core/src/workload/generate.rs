use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Zipf};
use serde::{Deserialize, Serialize};

use crate::event::{make_primitive, secs_to_micros, EventType, Micros, PrimitiveEvent, Value};

use super::WorkloadError;

/// Events per second for every generated stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateProfile {
    Constant(f64),
    /// Consecutive `(rate, seconds)` pieces; the last one extends to the
    /// end of the run.
    Piecewise(Vec<(f64, f64)>),
}

impl RateProfile {
    /// `steps` equal-length pieces from `from` to `to` over `duration_s`.
    pub fn ramp(from: f64, to: f64, steps: usize, duration_s: f64) -> Self {
        let steps = steps.max(1);
        let len = duration_s / steps as f64;
        let pieces = (0..steps)
            .map(|k| {
                let rate = if steps == 1 {
                    from
                } else {
                    from + (to - from) * k as f64 / (steps - 1) as f64
                };
                (rate, len)
            })
            .collect();
        RateProfile::Piecewise(pieces)
    }

    pub fn rate_at(&self, t_s: f64) -> f64 {
        match self {
            RateProfile::Constant(r) => *r,
            RateProfile::Piecewise(pieces) => {
                let mut start = 0.0;
                for (rate, len) in pieces {
                    if t_s < start + len {
                        return *rate;
                    }
                    start += len;
                }
                pieces.last().map_or(0.0, |p| p.0)
            }
        }
    }

    fn pieces(&self, duration_s: f64) -> Vec<(f64, f64, f64)> {
        match self {
            RateProfile::Constant(r) => vec![(0.0, duration_s, *r)],
            RateProfile::Piecewise(p) => {
                let mut out = Vec::new();
                let mut start = 0.0;
                for (i, (rate, len)) in p.iter().enumerate() {
                    let end = if i + 1 == p.len() { duration_s } else { (start + len).min(duration_s) };
                    if end > start {
                        out.push((start, end, *rate));
                    }
                    start += len;
                }
                out
            }
        }
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        let ok = match self {
            RateProfile::Constant(r) => *r > 0.0,
            RateProfile::Piecewise(p) => !p.is_empty() && p.iter().all(|&(r, l)| r > 0.0 && l >= 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(WorkloadError::Invalid("rates must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterArrival {
    Deterministic,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub rate: RateProfile,
    pub inter_arrival: InterArrival,
    /// Distinct values of the key attribute.
    pub key_cardinality: usize,
    /// Zipf exponent of the key distribution; 0 is uniform.
    pub key_skew: f64,
    pub key_attribute: String,
    pub duration_s: f64,
    pub seed: u64,
    /// One stream per type, all at the same rate profile.
    pub event_types: Vec<String>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            rate: RateProfile::Constant(100.0),
            inter_arrival: InterArrival::Exponential,
            key_cardinality: 10,
            key_skew: 1.0,
            key_attribute: "Id".into(),
            duration_s: 60.0,
            seed: 1,
            event_types: vec!["E1".into(), "E2".into()],
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        self.rate.validate()?;
        if !(self.duration_s >= 0.0) {
            return Err(WorkloadError::Invalid("duration must be non-negative".into()));
        }
        if self.key_cardinality < 1 {
            return Err(WorkloadError::Invalid("key cardinality must be at least 1".into()));
        }
        if !(self.key_skew >= 0.0) {
            return Err(WorkloadError::Invalid("key skew must be non-negative".into()));
        }
        if self.event_types.is_empty() {
            return Err(WorkloadError::Invalid("at least one event type".into()));
        }
        Ok(())
    }
}

fn stream_times(spec: &WorkloadSpec, rng: &mut ChaCha8Rng) -> Vec<Micros> {
    let mut times = Vec::new();
    for (start, end, rate) in spec.rate.pieces(spec.duration_s) {
        match spec.inter_arrival {
            InterArrival::Deterministic => {
                let mut k = 0u64;
                loop {
                    let t = start + k as f64 / rate;
                    if t >= end {
                        break;
                    }
                    times.push(secs_to_micros(t));
                    k += 1;
                }
            }
            InterArrival::Exponential => {
                let mut t = start;
                loop {
                    let e: f64 = Exp1.sample(rng);
                    t += e / rate;
                    if t >= end {
                        break;
                    }
                    times.push(secs_to_micros(t));
                }
            }
        }
    }
    times
}

/// Generates one stream per event type and merges them by timestamp (ties
/// in type order). Ids are assigned in merged order. Identical specs give
/// identical output.
pub fn generate_streams(spec: &WorkloadSpec) -> Result<Vec<PrimitiveEvent>, WorkloadError> {
    spec.validate()?;
    let key: Arc<str> = Arc::from(spec.key_attribute.as_str());
    let zipf = Zipf::new(spec.key_cardinality as f64, spec.key_skew)
        .map_err(|e| WorkloadError::Invalid(format!("key distribution: {e}")))?;
    let mut tagged: Vec<(Micros, usize, PrimitiveEvent)> = Vec::new();
    for (k, name) in spec.event_types.iter().enumerate() {
        let ty = EventType::new(name)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k as u64 + 1);
        let times = stream_times(spec, &mut rng);
        for t in times {
            let id = zipf.sample(&mut rng) as i64;
            let e = make_primitive(ty.clone(), t, vec![(key.clone(), Value::Int(id))])?;
            tagged.push((t, k, e));
        }
    }
    tagged.sort_by_key(|(t, k, _)| (*t, *k));
    Ok(tagged
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, e))| e.with_id(i as u64))
        .collect())
}

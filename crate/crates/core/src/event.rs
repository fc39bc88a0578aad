//! Event model: primitive and composite events, stream descriptors, and the
//! line-oriented replay format.
//!
//! All timestamps are integer microseconds on a single logical clock.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

/// Timestamp or duration in microseconds.
pub type Micros = i64;

pub const MICROS_PER_SECOND: Micros = 1_000_000;

/// Converts seconds to microseconds, rounding to the nearest microsecond.
pub fn secs_to_micros(secs: f64) -> Micros {
    (secs * MICROS_PER_SECOND as f64).round() as Micros
}

pub fn micros_to_secs(us: Micros) -> f64 {
    us as f64 / MICROS_PER_SECOND as f64
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("negative timestamp {0}")]
    NegativeTimestamp(Micros),
    #[error("empty event type name")]
    EmptyType,
    #[error("composite event needs at least one constituent")]
    EmptyComposite,
    #[error("arrival timestamp already set")]
    ArrivalAlreadySet,
    #[error("departure {departure} precedes arrival {arrival}")]
    DepartureBeforeArrival { arrival: Micros, departure: Micros },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
}

/// Symbolic event type, e.g. `E1`. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventType(Arc<str>);

impl EventType {
    pub fn new(name: &str) -> Result<Self, EventError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(EventError::EmptyType);
        }
        Ok(Self(Arc::from(name)))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Scalar attribute value.
///
/// Floats compare and hash by bit pattern (total order via `total_cmp`), so
/// values can key hash maps and be sorted deterministically.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(Arc<str>),
}

impl Value {
    pub fn str(s: &str) -> Self {
        Value::Str(Arc::from(s))
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Float(_) => 1,
            Value::Str(_) => 2,
        }
    }

    /// Approximate in-memory footprint, used for load accounting.
    pub fn size_bytes(&self) -> usize {
        match self {
            Value::Int(_) | Value::Float(_) => 8,
            Value::Str(s) => 16 + s.len(),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Int(v) => v.hash(state),
            Value::Float(v) => v.to_bits().hash(state),
            Value::Str(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            // `{:?}` keeps a decimal point so the value re-parses as a float.
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::str(v)
    }
}

/// Named attribute.
pub type Attribute = (Arc<str>, Value);

/// A primitive event. `start_ts == end_ts` always holds.
///
/// Equality, ordering and hashing use the event's identity (id, type,
/// timestamp, attributes) and ignore the runtime `arrival_ts` /
/// `departure_ts` stamps.
#[derive(Debug, Clone)]
pub struct PrimitiveEvent {
    pub id: u64,
    pub event_type: EventType,
    ts: Micros,
    pub attributes: Arc<[Attribute]>,
    arrival_ts: Option<Micros>,
    departure_ts: Option<Micros>,
}

/// Builds a primitive event at `ts` with the given attributes.
pub fn make_primitive(
    event_type: EventType,
    ts: Micros,
    attributes: Vec<Attribute>,
) -> Result<PrimitiveEvent, EventError> {
    if ts < 0 {
        return Err(EventError::NegativeTimestamp(ts));
    }
    Ok(PrimitiveEvent {
        id: 0,
        event_type,
        ts,
        attributes: attributes.into(),
        arrival_ts: None,
        departure_ts: None,
    })
}

impl PrimitiveEvent {
    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    pub fn start_ts(&self) -> Micros {
        self.ts
    }

    pub fn end_ts(&self) -> Micros {
        self.ts
    }

    pub fn attribute(&self, name: &str) -> Option<&Value> {
        self.attributes
            .iter()
            .find(|(k, _)| k.as_ref() == name)
            .map(|(_, v)| v)
    }

    pub fn arrival_ts(&self) -> Option<Micros> {
        self.arrival_ts
    }

    pub fn departure_ts(&self) -> Option<Micros> {
        self.departure_ts
    }

    /// Stamps the arrival time. Fails if it was already stamped.
    pub fn stamp_arrival(&mut self, ts: Micros) -> Result<(), EventError> {
        if self.arrival_ts.is_some() {
            return Err(EventError::ArrivalAlreadySet);
        }
        self.arrival_ts = Some(ts);
        Ok(())
    }

    pub fn set_departure(&mut self, ts: Micros) -> Result<(), EventError> {
        if let Some(arrival) = self.arrival_ts {
            if ts < arrival {
                return Err(EventError::DepartureBeforeArrival {
                    arrival,
                    departure: ts,
                });
            }
        }
        self.departure_ts = Some(ts);
        Ok(())
    }

    /// Processing time `departure - arrival`, when both are stamped.
    pub fn processing_time(&self) -> Option<Micros> {
        Some(self.departure_ts? - self.arrival_ts?)
    }

    pub fn size_bytes(&self) -> usize {
        32 + self.event_type.name().len()
            + self
                .attributes
                .iter()
                .map(|(k, v)| k.len() + v.size_bytes())
                .sum::<usize>()
    }

    fn identity(&self) -> (Micros, u64, &EventType, &[Attribute]) {
        (self.ts, self.id, &self.event_type, &self.attributes)
    }
}

impl PartialEq for PrimitiveEvent {
    fn eq(&self, other: &Self) -> bool {
        self.identity() == other.identity()
    }
}

impl Eq for PrimitiveEvent {}

impl PartialOrd for PrimitiveEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PrimitiveEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.identity().cmp(&other.identity())
    }
}

impl Hash for PrimitiveEvent {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.identity().hash(state);
    }
}

/// A composite event built from primitive constituents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositeEvent {
    pub event_type: EventType,
    pub constituents: Vec<PrimitiveEvent>,
    start_ts: Micros,
    end_ts: Micros,
    pub attributes: Vec<Attribute>,
}

/// Composes primitive events; start/end are the min start and max end.
pub fn compose(
    event_type: EventType,
    parts: Vec<PrimitiveEvent>,
) -> Result<CompositeEvent, EventError> {
    let start_ts = parts
        .iter()
        .map(PrimitiveEvent::start_ts)
        .min()
        .ok_or(EventError::EmptyComposite)?;
    let end_ts = parts.iter().map(PrimitiveEvent::end_ts).max().unwrap_or(start_ts);
    Ok(CompositeEvent {
        event_type,
        constituents: parts,
        start_ts,
        end_ts,
        attributes: Vec::new(),
    })
}

impl CompositeEvent {
    pub fn start_ts(&self) -> Micros {
        self.start_ts
    }

    pub fn end_ts(&self) -> Micros {
        self.end_ts
    }

    pub fn span(&self) -> Micros {
        self.end_ts - self.start_ts
    }

    pub fn size_bytes(&self) -> usize {
        48 + self
            .constituents
            .iter()
            .map(PrimitiveEvent::size_bytes)
            .sum::<usize>()
    }

    /// Constituent timestamps and ids in constituent order.
    pub fn constituent_keys(&self) -> impl Iterator<Item = (Micros, u64)> + '_ {
        self.constituents.iter().map(|c| (c.start_ts(), c.id))
    }

    /// Deterministic order: end timestamp, then [`Self::constituent_keys`].
    pub fn order_cmp(&self, other: &Self) -> Ordering {
        self.end_ts
            .cmp(&other.end_ts)
            .then_with(|| self.constituent_keys().cmp(other.constituent_keys()))
    }
}

/// Describes one input stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamDescriptor {
    pub source_id: String,
    /// Events per second.
    pub rate: f64,
    pub event_type: EventType,
}

impl StreamDescriptor {
    pub fn new(source_id: &str, rate: f64, event_type: EventType) -> Result<Self, EventError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(EventError::NonPositiveRate(rate));
        }
        Ok(Self {
            source_id: source_id.to_string(),
            rate,
            event_type,
        })
    }
}

/// Formats one event as `type,ts,key=value,...`.
pub fn encode_line(event: &PrimitiveEvent) -> Result<String, EventError> {
    let mut out = format!("{},{}", event.event_type, event.start_ts());
    for (k, v) in event.attributes.iter() {
        let text = v.to_string();
        if [k.as_ref(), text.as_str()]
            .iter()
            .any(|s| s.contains([',', '=', '\n', '\r']))
        {
            return Err(EventError::Format {
                line: 0,
                msg: format!("attribute {k} contains a reserved character"),
            });
        }
        out.push(',');
        out.push_str(k);
        out.push('=');
        out.push_str(&text);
    }
    Ok(out)
}

fn parse_value(text: &str) -> Value {
    if let Ok(v) = text.parse::<i64>() {
        Value::Int(v)
    } else if let Ok(v) = text.parse::<f64>() {
        Value::Float(v)
    } else {
        Value::str(text)
    }
}

/// Parses one `type,ts,key=value,...` line. `line_no` is used in errors.
pub fn decode_line(line: &str, line_no: usize) -> Result<PrimitiveEvent, EventError> {
    let err = |msg: String| EventError::Format { line: line_no, msg };
    let mut fields = line.trim_end_matches(['\r', '\n']).split(',');
    let ty = fields.next().unwrap_or_default();
    let event_type = EventType::new(ty).map_err(|e| err(e.to_string()))?;
    let ts_text = fields.next().ok_or_else(|| err("missing timestamp".into()))?;
    let ts: Micros = ts_text
        .trim()
        .parse()
        .map_err(|_| err(format!("bad timestamp {ts_text:?}")))?;
    let mut attributes = Vec::new();
    for field in fields {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| err(format!("attribute {field:?} is not key=value")))?;
        if k.is_empty() {
            return Err(err("empty attribute name".into()));
        }
        attributes.push((Arc::from(k), parse_value(v)));
    }
    make_primitive(event_type, ts, attributes).map_err(|e| err(e.to_string()))
}

/// Reads a replay file body. Blank lines and `#` comments are skipped; ids
/// are assigned sequentially in file order.
pub fn decode_stream(text: &str) -> Result<Vec<PrimitiveEvent>, EventError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let id = out.len() as u64;
        out.push(decode_line(trimmed, idx + 1)?.with_id(id));
    }
    Ok(out)
}

pub fn encode_stream(events: &[PrimitiveEvent]) -> Result<String, EventError> {
    let mut out = String::new();
    for e in events {
        out.push_str(&encode_line(e)?);
        out.push('\n');
    }
    Ok(out)
}

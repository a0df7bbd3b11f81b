//! Puzzle event log records and the `events.jsonl` format.

use super::{FormatError, ModelError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn name(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }

    pub fn other(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadRange {
    Close,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    PuzzleEnter,
    StimulusShown,
    ButtonPress,
    SpokenPassword,
    UfoAnswer,
    ReadAttempt,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::PuzzleEnter,
        EventKind::StimulusShown,
        EventKind::ButtonPress,
        EventKind::SpokenPassword,
        EventKind::UfoAnswer,
        EventKind::ReadAttempt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::PuzzleEnter => "PuzzleEnter",
            EventKind::StimulusShown => "StimulusShown",
            EventKind::ButtonPress => "ButtonPress",
            EventKind::SpokenPassword => "SpokenPassword",
            EventKind::UfoAnswer => "UfoAnswer",
            EventKind::ReadAttempt => "ReadAttempt",
        }
    }

    fn from_name(s: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventPayload {
    PuzzleEnter,
    StimulusShown,
    ButtonPress { hand: Hand },
    SpokenPassword { text: String },
    UfoAnswer { distinct_count: u32 },
    ReadAttempt { success: bool, range: ReadRange },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::PuzzleEnter => EventKind::PuzzleEnter,
            EventPayload::StimulusShown => EventKind::StimulusShown,
            EventPayload::ButtonPress { .. } => EventKind::ButtonPress,
            EventPayload::SpokenPassword { .. } => EventKind::SpokenPassword,
            EventPayload::UfoAnswer { .. } => EventKind::UfoAnswer,
            EventPayload::ReadAttempt { .. } => EventKind::ReadAttempt,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            EventPayload::PuzzleEnter | EventPayload::StimulusShown => Value::Object(Map::new()),
            EventPayload::ButtonPress { hand } => json!({ "hand": hand }),
            EventPayload::SpokenPassword { text } => json!({ "text": text }),
            EventPayload::UfoAnswer { distinct_count } => json!({ "distinct_count": distinct_count }),
            EventPayload::ReadAttempt { success, range } => json!({ "success": success, "range": range }),
        }
    }

    fn from_json(kind: EventKind, v: &Value) -> Result<EventPayload, String> {
        fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value, String> {
            v.get(name).ok_or_else(|| format!("payload missing {name:?}"))
        }
        fn parse<T: for<'de> Deserialize<'de>>(v: &Value, name: &str) -> Result<T, String> {
            serde_json::from_value(field(v, name)?.clone()).map_err(|e| format!("payload field {name:?}: {e}"))
        }
        Ok(match kind {
            EventKind::PuzzleEnter => EventPayload::PuzzleEnter,
            EventKind::StimulusShown => EventPayload::StimulusShown,
            EventKind::ButtonPress => EventPayload::ButtonPress { hand: parse(v, "hand")? },
            EventKind::SpokenPassword => EventPayload::SpokenPassword { text: parse(v, "text")? },
            EventKind::UfoAnswer => EventPayload::UfoAnswer { distinct_count: parse(v, "distinct_count")? },
            EventKind::ReadAttempt => EventPayload::ReadAttempt {
                success: parse(v, "success")?,
                range: parse(v, "range")?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub puzzle_id: u8,
    pub payload: EventPayload,
}

impl EventRecord {
    pub fn new(t: f64, puzzle_id: u8, payload: EventPayload) -> Result<Self, ModelError> {
        let r = EventRecord { t, puzzle_id, payload };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.t.is_finite() {
            return Err(ModelError::InvalidEventTime(self.t));
        }
        if !(1..=24).contains(&self.puzzle_id) {
            return Err(ModelError::PuzzleIdOutOfRange(self.puzzle_id as i64));
        }
        Ok(())
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "t": self.t,
            "kind": self.kind().name(),
            "puzzle_id": self.puzzle_id,
            "payload": self.payload.to_json(),
        })
    }
}

#[derive(Deserialize)]
struct RawEvent {
    t: f64,
    kind: String,
    puzzle_id: i64,
    #[serde(default)]
    payload: Value,
}

/// Parses one JSON object per line; blank lines are skipped. The result is
/// stably sorted by time.
pub fn parse_events_jsonl(input: &str) -> Result<Vec<EventRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, text) in input.lines().enumerate() {
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| FormatError::MalformedLine { line, reason };
        let raw: RawEvent = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        if !raw.t.is_finite() {
            return Err(malformed("time is not finite".into()));
        }
        let kind = EventKind::from_name(&raw.kind).ok_or(FormatError::UnknownKind { line, kind: raw.kind.clone() })?;
        if !(1..=24).contains(&raw.puzzle_id) {
            return Err(FormatError::PuzzleIdOutOfRange { line, id: raw.puzzle_id });
        }
        let payload = EventPayload::from_json(kind, &raw.payload).map_err(malformed)?;
        out.push(EventRecord { t: raw.t, puzzle_id: raw.puzzle_id as u8, payload });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

pub fn write_events_jsonl(events: &[EventRecord]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&e.to_json().to_string());
        s.push('\n');
    }
    s
}

/// Time span of each puzzle: from its first `PuzzleEnter` to the next
/// `PuzzleEnter` of another puzzle, or `end` for the last one. Re-entries
/// widen the span.
pub fn puzzle_spans(events: &[EventRecord], end: f64) -> BTreeMap<u8, (f64, f64)> {
    let enters: Vec<&EventRecord> = events.iter().filter(|e| e.payload == EventPayload::PuzzleEnter).collect();
    let mut out: BTreeMap<u8, (f64, f64)> = BTreeMap::new();
    for (i, e) in enters.iter().enumerate() {
        let stop = enters[i + 1..].iter().find(|n| n.puzzle_id != e.puzzle_id).map_or(end, |n| n.t);
        let span = out.entry(e.puzzle_id).or_insert((e.t, stop));
        span.0 = span.0.min(e.t);
        span.1 = span.1.max(stop);
    }
    out
}

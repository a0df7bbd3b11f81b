//! Behavioral and cognitive attributes scored from puzzle event logs.

pub mod layout;
pub mod moca;

pub use layout::{LayoutError, Panel, PanelLayout};
pub use moca::{score_moca, MocaError, MocaKey, MocaScore, SessionDate, PASS_THRESHOLD};

use crate::model::{EventPayload, EventRecord, ReadRange, TelemetryFrame, TelemetryTrace};
use std::collections::BTreeSet;
use thiserror::Error;

pub const COLOR_PUZZLE: u8 = 5;
pub const LANGUAGE_PUZZLE: u8 = 13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BehaviorError {
    #[error("no spoken password for puzzle {0}")]
    MissingPassword(u8),
    #[error("unrecognized password {0:?}")]
    UnrecognizedPassword(String),
    #[error("gaze ray hit no panel")]
    NoGazeHit,
    #[error("no telemetry around the utterance")]
    NoTelemetry,
    #[error("no {0:?} read attempt")]
    MissingReadAttempt(ReadRange),
}

fn spoken(events: &[EventRecord], puzzle: u8) -> impl Iterator<Item = (f64, &str)> {
    events.iter().filter(move |e| e.puzzle_id == puzzle).filter_map(|e| match &e.payload {
        EventPayload::SpokenPassword { text } => Some((e.t, text.as_str())),
        _ => None,
    })
}

/// Reading "as" off the plate means the digits were invisible.
pub fn detect_colorblind(events: &[EventRecord]) -> Result<bool, BehaviorError> {
    let (_, text) = spoken(events, COLOR_PUZZLE).last().ok_or(BehaviorError::MissingPassword(COLOR_PUZZLE))?;
    match text.trim().to_lowercase().as_str() {
        "as" => Ok(true),
        "daisy" => Ok(false),
        _ => Err(BehaviorError::UnrecognizedPassword(text.to_string())),
    }
}

/// Frame closest in time to `t`.
pub fn frame_at(trace: &TelemetryTrace, t: f64) -> Option<&TelemetryFrame> {
    let f = trace.frames();
    let i = f.partition_point(|x| x.t < t);
    match (i.checked_sub(1).and_then(|j| f.get(j)), f.get(i)) {
        (Some(a), Some(b)) => Some(if t - a.t <= b.t - t { a } else { b }),
        (a, b) => a.or(b),
    }
}

/// Languages whose panel the head faces while the greeting is spoken.
pub fn detect_languages(
    trace: &TelemetryTrace,
    events: &[EventRecord],
    layout: &PanelLayout,
) -> Result<BTreeSet<String>, BehaviorError> {
    let times: Vec<f64> = spoken(events, LANGUAGE_PUZZLE).map(|(t, _)| t).collect();
    if times.is_empty() {
        return Err(BehaviorError::MissingPassword(LANGUAGE_PUZZLE));
    }
    let mut out = BTreeSet::new();
    for t in times {
        let f = frame_at(trace, t).ok_or(BehaviorError::NoTelemetry)?;
        if let Some(p) = layout.hit(f.hmd.position, f.hmd.orientation.forward()) {
            out.insert(p.language.clone());
        }
    }
    if out.is_empty() {
        return Err(BehaviorError::NoGazeHit);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eyesight {
    pub hyperopia: bool,
    pub myopia: bool,
}

/// A failed close read flags hyperopia, a failed far read myopia. With
/// several attempts the last one counts.
pub fn assess_eyesight(events: &[EventRecord]) -> Result<Eyesight, BehaviorError> {
    let last = |range: ReadRange| {
        events
            .iter()
            .filter_map(|e| match e.payload {
                EventPayload::ReadAttempt { success, range: r } if r == range => Some(success),
                _ => None,
            })
            .next_back()
            .ok_or(BehaviorError::MissingReadAttempt(range))
    };
    Ok(Eyesight { hyperopia: !last(ReadRange::Close)?, myopia: !last(ReadRange::Far)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Quat, Vec3};
    use crate::model::Pose;

    fn said(t: f64, puzzle: u8, text: &str) -> EventRecord {
        EventRecord::new(t, puzzle, EventPayload::SpokenPassword { text: text.into() }).unwrap()
    }

    fn read(t: f64, range: ReadRange, success: bool) -> EventRecord {
        let puzzle = if range == ReadRange::Close { 23 } else { 24 };
        EventRecord::new(t, puzzle, EventPayload::ReadAttempt { success, range }).unwrap()
    }

    fn facing(dir: Vec3) -> TelemetryTrace {
        let hmd = Pose { position: Vec3::new(0.0, 1.6, 0.0), orientation: Quat::looking_along(dir) };
        let frames = (0..10)
            .map(|i| TelemetryFrame { t: i as f64, hmd, left: Pose::at(Vec3::ZERO), right: Pose::at(Vec3::ZERO) })
            .collect();
        TelemetryTrace::new(frames, None).unwrap()
    }

    #[test]
    fn colorblind_words() {
        assert_eq!(detect_colorblind(&[said(1.0, 5, "daisy")]), Ok(false));
        assert_eq!(detect_colorblind(&[said(1.0, 5, "AS")]), Ok(true));
        assert_eq!(
            detect_colorblind(&[said(1.0, 5, "tulip")]),
            Err(BehaviorError::UnrecognizedPassword("tulip".into()))
        );
        assert_eq!(detect_colorblind(&[]), Err(BehaviorError::MissingPassword(5)));
    }

    #[test]
    fn gaze_at_spanish_panel() {
        let layout = PanelLayout::shipped();
        let dir = layout.panel("es").unwrap().center - Vec3::new(0.0, 1.6, 0.0);
        let got = detect_languages(&facing(dir), &[said(4.2, 13, "hola")], &layout).unwrap();
        assert_eq!(got, BTreeSet::from(["es".to_string()]));
    }

    #[test]
    fn gaze_parallel_to_wall_misses() {
        let layout = PanelLayout::shipped();
        let r = detect_languages(&facing(Vec3::new(1.0, 0.0, 0.0)), &[said(4.0, 13, "hello")], &layout);
        assert_eq!(r, Err(BehaviorError::NoGazeHit));
    }

    #[test]
    fn eyesight_mapping() {
        let ev = [read(1.0, ReadRange::Close, true), read(2.0, ReadRange::Far, false)];
        assert_eq!(assess_eyesight(&ev), Ok(Eyesight { hyperopia: false, myopia: true }));
        let ev = [read(1.0, ReadRange::Close, true), read(2.0, ReadRange::Far, true)];
        assert_eq!(assess_eyesight(&ev), Ok(Eyesight { hyperopia: false, myopia: false }));
        assert_eq!(assess_eyesight(&ev[..1]), Err(BehaviorError::MissingReadAttempt(ReadRange::Far)));
    }
}

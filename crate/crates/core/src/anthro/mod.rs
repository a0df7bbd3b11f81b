//! Body measurements recovered from head and controller poses.

use crate::model::{puzzle_spans, DeviceApiSample, EventPayload, EventRecord, Hand, TelemetryFrame, TelemetryTrace};
use crate::stats::{median, percentile, round_to_fraction};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Head-top above the tracked eye point.
pub const EYE_OFFSET_M: f64 = 0.11;
/// Fingertip beyond the grip point, both hands together.
pub const FINGERTIP_CORRECTION_M: f64 = 0.10;
pub const SHOULDER_DROP_M: f64 = 0.15;
pub const SHOULDER_BAND_M: f64 = 0.25;
pub const ARM_UNDETERMINED_M: f64 = 0.01;
pub const LOW_FITNESS_RATIO: f64 = 0.25;
pub const FAST_REACTION_S: f64 = 0.25;
pub const HEIGHT_PERCENTILE: f64 = 95.0;

pub const TPOSE_PUZZLE: u8 = 8;
pub const SQUAT_PUZZLE: u8 = 9;
pub const REACTION_PUZZLE: u8 = 11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnthroError {
    #[error("no telemetry in the stand windows")]
    EmptyWindow,
    #[error("no frame matches the T-pose posture")]
    NoTposeDetected,
    #[error("no button presses")]
    NoButtonEvents,
    #[error("device API not available to this attacker")]
    CapabilityDenied,
    #[error("no squat segment")]
    NoSquatSegment,
    #[error("no stimulus/press pairs")]
    NoStimulusPairs,
    #[error("press at {0} precedes its stimulus")]
    NegativeLatency(f64),
}

fn cm(x: f64) -> f64 {
    round_to_fraction(x, 100.0)
}

/// p95 of HMD y over the windows, before the eye offset.
pub fn head_height_p95(trace: &TelemetryTrace, windows: &[(f64, f64)]) -> Option<f64> {
    let ys: Vec<f64> = windows
        .iter()
        .flat_map(|&(a, b)| trace.window(a, b))
        .map(|f| f.hmd.position.y)
        .collect();
    percentile(&ys, HEIGHT_PERCENTILE)
}

pub fn estimate_height(trace: &TelemetryTrace, stand_windows: &[(f64, f64)]) -> Result<f64, AnthroError> {
    head_height_p95(trace, stand_windows)
        .map(|y| cm(y + EYE_OFFSET_M))
        .ok_or(AnthroError::EmptyWindow)
}

/// Both controllers within the band around shoulder height.
pub fn is_tpose(f: &TelemetryFrame) -> bool {
    let shoulder = f.hmd.position.y - SHOULDER_DROP_M;
    (f.left.position.y - shoulder).abs() <= SHOULDER_BAND_M && (f.right.position.y - shoulder).abs() <= SHOULDER_BAND_M
}

/// Frames of the pose-mimic puzzle, or the whole trace when the log does
/// not mark it.
fn tpose_frames<'a>(trace: &'a TelemetryTrace, events: &[EventRecord]) -> &'a [TelemetryFrame] {
    match puzzle_spans(events, trace.end()).get(&TPOSE_PUZZLE) {
        Some(&(a, b)) => trace.window(a, b),
        None => trace.frames(),
    }
}

/// Largest horizontal controller separation over T-pose frames.
pub fn max_tpose_separation(frames: &[TelemetryFrame]) -> Option<f64> {
    frames
        .iter()
        .filter(|f| is_tpose(f))
        .map(|f| f.left.position.horizontal_distance(f.right.position))
        .max_by(f64::total_cmp)
}

pub fn estimate_wingspan(trace: &TelemetryTrace, events: &[EventRecord]) -> Result<f64, AnthroError> {
    max_tpose_separation(tpose_frames(trace, events))
        .map(|s| cm(s + FINGERTIP_CORRECTION_M))
        .ok_or(AnthroError::NoTposeDetected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LongerArm {
    LeftLonger,
    RightLonger,
    Undetermined,
}

impl LongerArm {
    pub fn name(self) -> &'static str {
        match self {
            LongerArm::LeftLonger => "left_longer",
            LongerArm::RightLonger => "right_longer",
            LongerArm::Undetermined => "undetermined",
        }
    }
}

/// Max horizontal reach of each controller from the head's ground
/// projection, over T-pose frames.
pub fn max_reach(frames: &[TelemetryFrame]) -> Option<(f64, f64)> {
    frames.iter().filter(|f| is_tpose(f)).fold(None, |acc, f| {
        let l = f.hmd.position.horizontal_distance(f.left.position);
        let r = f.hmd.position.horizontal_distance(f.right.position);
        Some(match acc {
            None => (l, r),
            Some((a, b)) => (f64::max(a, l), f64::max(b, r)),
        })
    })
}

pub fn compare_arm_lengths(trace: &TelemetryTrace, events: &[EventRecord]) -> Result<LongerArm, AnthroError> {
    let (l, r) = max_reach(tpose_frames(trace, events)).ok_or(AnthroError::NoTposeDetected)?;
    // Tolerance keeps a 1 cm grid difference from flipping on rounding.
    Ok(if l - r >= ARM_UNDETERMINED_M - 1e-9 {
        LongerArm::LeftLonger
    } else if r - l >= ARM_UNDETERMINED_M - 1e-9 {
        LongerArm::RightLonger
    } else {
        LongerArm::Undetermined
    })
}

fn path_length(frames: &[TelemetryFrame], hand: Hand) -> f64 {
    let pos = |f: &TelemetryFrame| match hand {
        Hand::Left => f.left.position,
        Hand::Right => f.right.position,
    };
    frames.windows(2).map(|w| (pos(&w[1]) - pos(&w[0])).norm()).sum()
}

/// Majority hand over button presses; a tie goes to the controller that
/// moved more.
pub fn estimate_handedness(events: &[EventRecord], trace: &TelemetryTrace) -> Result<Hand, AnthroError> {
    let (mut left, mut right) = (0usize, 0usize);
    for e in events {
        if let EventPayload::ButtonPress { hand } = e.payload {
            match hand {
                Hand::Left => left += 1,
                Hand::Right => right += 1,
            }
        }
    }
    if left + right == 0 {
        return Err(AnthroError::NoButtonEvents);
    }
    Ok(match left.cmp(&right) {
        std::cmp::Ordering::Greater => Hand::Left,
        std::cmp::Ordering::Less => Hand::Right,
        std::cmp::Ordering::Equal => {
            if path_length(trace.frames(), Hand::Left) > path_length(trace.frames(), Hand::Right) {
                Hand::Left
            } else {
                Hand::Right
            }
        }
    })
}

pub fn estimate_ipd(device_api: Option<&DeviceApiSample>) -> Result<f64, AnthroError> {
    device_api
        .map(|d| round_to_fraction(d.ipd_m, 10_000.0))
        .ok_or(AnthroError::CapabilityDenied)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessEstimate {
    pub depth_ratio: f64,
    pub low: bool,
}

/// Standing level is the p95 of head height over the squat puzzle.
pub fn estimate_fitness(
    trace: &TelemetryTrace,
    events: &[EventRecord],
    height_m: f64,
) -> Result<FitnessEstimate, AnthroError> {
    let &(a, b) = puzzle_spans(events, trace.end()).get(&SQUAT_PUZZLE).ok_or(AnthroError::NoSquatSegment)?;
    let ys: Vec<f64> = trace.window(a, b).iter().map(|f| f.hmd.position.y).collect();
    let standing = percentile(&ys, HEIGHT_PERCENTILE).ok_or(AnthroError::NoSquatSegment)?;
    let lowest = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let depth_ratio = (standing - lowest) / height_m;
    Ok(FitnessEstimate { depth_ratio, low: depth_ratio < LOW_FITNESS_RATIO })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionEstimate {
    pub seconds: f64,
    pub fast: bool,
}

pub fn classify_reaction(seconds: f64) -> bool {
    seconds < FAST_REACTION_S
}

/// Median stimulus-to-press latency in the reaction puzzle, at one-frame
/// (1/60 s) resolution. Stimuli and presses pair up in time order.
pub fn estimate_reaction_time(events: &[EventRecord]) -> Result<ReactionEstimate, AnthroError> {
    let in_puzzle = events.iter().filter(|e| e.puzzle_id == REACTION_PUZZLE);
    let stimuli: Vec<f64> =
        in_puzzle.clone().filter(|e| e.payload == EventPayload::StimulusShown).map(|e| e.t).collect();
    let presses: Vec<f64> =
        in_puzzle.filter(|e| matches!(e.payload, EventPayload::ButtonPress { .. })).map(|e| e.t).collect();
    let mut lat = Vec::new();
    for (s, p) in stimuli.iter().zip(&presses) {
        if p < s {
            return Err(AnthroError::NegativeLatency(*p));
        }
        lat.push(p - s);
    }
    let m = median(&lat).ok_or(AnthroError::NoStimulusPairs)?;
    let seconds = round_to_fraction(m, 60.0);
    Ok(ReactionEstimate { seconds, fast: classify_reaction(seconds) })
}

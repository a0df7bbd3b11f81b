//! Shared data types: poses, traces, event logs, device API samples, latency
//! observations, session bundles, attacker tiers and attribute reports.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards. File formats live in the submodules.

mod events;
mod report;
mod tier;
mod trace_csv;

pub use events::{parse_events_jsonl, puzzle_spans, write_events_jsonl, EventKind, EventPayload, EventRecord, Hand, ReadRange};
pub use report::{AttributeEntry, AttributeReport, ReportValue};
pub use tier::{Access, AttackerTier, ObservableClass};
pub use trace_csv::{parse_trace_csv, write_trace_csv, TRACE_CSV_HEADER};

use crate::geom::{Quat, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on |q| - 1 for in-memory poses.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-6;
/// Broadcast rate of networked/presented telemetry.
pub const NETWORKED_RATE_HZ: f64 = 30.0;
pub const IPD_RANGE_M: (f64, f64) = (0.050, 0.080);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("pose contains a non-finite component")]
    NonFinitePose,
    #[error("quaternion norm {0} deviates from 1 by more than 1e-6")]
    UnnormalizedQuaternion(f64),
    #[error("frame time {0} is negative or not finite")]
    InvalidTime(f64),
    #[error("trace has no frames")]
    EmptyTrace,
    #[error("frame times are not strictly increasing at frame {index}")]
    NonMonotonicTime { index: usize },
    #[error("puzzle id {0} outside 1..=24")]
    PuzzleIdOutOfRange(i64),
    #[error("event time {0} is not finite")]
    InvalidEventTime(f64),
    #[error("ipd {0} m outside [0.050, 0.080]")]
    IpdOutOfRange(f64),
    #[error("device API sample has a non-finite or non-positive field")]
    InvalidDeviceApi,
    #[error("render timestamps are not strictly increasing")]
    RenderTimestampsNotIncreasing,
    #[error("round-trip time must be finite and non-negative, got {0}")]
    InvalidRtt(f64),
    #[error("tier {0} has no access to device APIs but a device API sample was supplied")]
    CapabilityViolation(AttackerTier),
    #[error("attribute {0} already present in report")]
    DuplicateAttribute(String),
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
}

/// Errors raised while reading the on-disk formats. Line numbers are 1-based
/// and count the header line.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: time does not increase")]
    NonMonotonicTime { line: usize },
    #[error("line {line}: quaternion norm {norm} deviates from 1 by more than 1e-3")]
    UnnormalizedQuaternion { line: usize, norm: f64 },
    #[error("line {line}: malformed event: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: unknown event kind {kind:?}")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: puzzle id {id} outside 1..=24")]
    PuzzleIdOutOfRange { line: usize, id: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Result<Self, ModelError> {
        let pose = Pose { position, orientation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn at(position: Vec3) -> Self {
        Pose { position, orientation: Quat::IDENTITY }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.position.is_finite() || !self.orientation.is_finite() {
            return Err(ModelError::NonFinitePose);
        }
        let n = self.orientation.norm();
        if (n - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(ModelError::UnnormalizedQuaternion(n));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryFrame {
    pub t: f64,
    pub hmd: Pose,
    pub left: Pose,
    pub right: Pose,
}

impl TelemetryFrame {
    /// True when all three poses are bit-identical to `other`'s.
    pub fn same_poses(&self, other: &TelemetryFrame) -> bool {
        self.hmd == other.hmd && self.left == other.left && self.right == other.right
    }

    pub fn poses(&self) -> [&Pose; 3] {
        [&self.hmd, &self.left, &self.right]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryTrace {
    frames: Vec<TelemetryFrame>,
    nominal_rate_hz: Option<f64>,
}

impl TelemetryTrace {
    pub fn new(frames: Vec<TelemetryFrame>, nominal_rate_hz: Option<f64>) -> Result<Self, ModelError> {
        if frames.is_empty() {
            return Err(ModelError::EmptyTrace);
        }
        for (i, f) in frames.iter().enumerate() {
            if !f.t.is_finite() || f.t < 0.0 {
                return Err(ModelError::InvalidTime(f.t));
            }
            if i > 0 && f.t <= frames[i - 1].t {
                return Err(ModelError::NonMonotonicTime { index: i });
            }
            for p in f.poses() {
                p.validate()?;
            }
        }
        Ok(Self { frames, nominal_rate_hz })
    }

    pub fn frames(&self) -> &[TelemetryFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn nominal_rate_hz(&self) -> Option<f64> {
        self.nominal_rate_hz
    }

    pub fn start(&self) -> f64 {
        self.frames[0].t
    }

    pub fn end(&self) -> f64 {
        self.frames[self.frames.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    /// Frames with `t0 <= t < t1`.
    pub fn window(&self, t0: f64, t1: f64) -> &[TelemetryFrame] {
        let a = self.frames.partition_point(|f| f.t < t0);
        let b = self.frames.partition_point(|f| f.t < t1);
        &self.frames[a..b.max(a)]
    }

    /// Re-broadcast at `rate_hz`: emits the latest frame available at each
    /// tick k / rate_hz.
    pub fn downsample(&self, rate_hz: f64) -> TelemetryTrace {
        let mut out: Vec<TelemetryFrame> = Vec::new();
        let mut next_tick = self.start();
        let mut k = 0u64;
        for f in &self.frames {
            if f.t >= next_tick {
                out.push(*f);
                while next_tick <= f.t {
                    k += 1;
                    next_tick = self.start() + k as f64 / rate_hz;
                }
            }
        }
        TelemetryTrace { frames: out, nominal_rate_hz: Some(rate_hz) }
    }

    pub fn map_frames(&self, f: impl FnMut(&TelemetryFrame) -> TelemetryFrame) -> Result<TelemetryTrace, ModelError> {
        TelemetryTrace::new(self.frames.iter().map(f).collect(), self.nominal_rate_hz)
    }
}

/// Host benchmark readings a privileged client can collect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HostBenchmark {
    pub cpu_ghz: f64,
    pub gpu_mhs: f64,
}

/// What device and host APIs report to a privileged client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceApiSample {
    pub ipd_m: f64,
    pub render_timestamps: Vec<f64>,
    pub reported_resolution_mp: f64,
    pub reported_fov_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<HostBenchmark>,
}

impl DeviceApiSample {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(IPD_RANGE_M.0..=IPD_RANGE_M.1).contains(&self.ipd_m) {
            return Err(ModelError::IpdOutOfRange(self.ipd_m));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.reported_resolution_mp) || !positive(self.reported_fov_deg) {
            return Err(ModelError::InvalidDeviceApi);
        }
        if let Some(h) = self.host {
            if !(h.cpu_ghz.is_finite() && h.cpu_ghz >= 0.0 && h.gpu_mhs.is_finite() && h.gpu_mhs >= 0.0) {
                return Err(ModelError::InvalidDeviceApi);
            }
        }
        if self.render_timestamps.iter().any(|t| !t.is_finite()) {
            return Err(ModelError::InvalidDeviceApi);
        }
        if self.render_timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::RenderTimestampsNotIncreasing);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub server_id: String,
    pub rtt_s: f64,
    pub t: f64,
}

impl LatencySample {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.rtt_s.is_finite() || self.rtt_s < 0.0 {
            return Err(ModelError::InvalidRtt(self.rtt_s));
        }
        if !self.t.is_finite() {
            return Err(ModelError::InvalidEventTime(self.t));
        }
        Ok(())
    }
}

/// One play-through as seen by an attacker of a given tier.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionBundle {
    trace: TelemetryTrace,
    events: Vec<EventRecord>,
    device_api: Option<DeviceApiSample>,
    latency: Vec<LatencySample>,
    attacker_tier: AttackerTier,
}

impl SessionBundle {
    pub fn new(
        trace: TelemetryTrace,
        mut events: Vec<EventRecord>,
        device_api: Option<DeviceApiSample>,
        latency: Vec<LatencySample>,
        attacker_tier: AttackerTier,
    ) -> Result<Self, ModelError> {
        if device_api.is_some() && attacker_tier.access(ObservableClass::Device) == Access::None {
            return Err(ModelError::CapabilityViolation(attacker_tier));
        }
        if let Some(d) = &device_api {
            d.validate()?;
        }
        for s in &latency {
            s.validate()?;
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self { trace, events, device_api, latency, attacker_tier })
    }

    pub fn trace(&self) -> &TelemetryTrace {
        &self.trace
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn device_api(&self) -> Option<&DeviceApiSample> {
        self.device_api.as_ref()
    }

    pub fn latency(&self) -> &[LatencySample] {
        &self.latency
    }

    pub fn attacker_tier(&self) -> AttackerTier {
        self.attacker_tier
    }

    /// Attaches latency probes collected alongside the session.
    pub fn with_latency(mut self, latency: Vec<LatencySample>) -> Result<Self, ModelError> {
        for s in &latency {
            s.validate()?;
        }
        self.latency = latency;
        Ok(self)
    }

    /// The view of this session available to `tier`: device APIs only for
    /// tiers that observe the device, latency only for tiers on the network
    /// path, and telemetry re-broadcast at 30 Hz for tiers that only see
    /// networked or presented telemetry.
    pub fn masked_for(&self, tier: AttackerTier) -> SessionBundle {
        let device_api = match tier.access(ObservableClass::Device) {
            Access::None => None,
            _ => self.device_api.clone(),
        };
        let latency = match tier.access(ObservableClass::Network) {
            Access::None => Vec::new(),
            _ => self.latency.clone(),
        };
        let trace = if tier.sees_processed_telemetry() {
            self.trace.clone()
        } else {
            self.trace.downsample(NETWORKED_RATE_HZ)
        };
        SessionBundle { trace, events: self.events.clone(), device_api, latency, attacker_tier: tier }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: f64) -> TelemetryFrame {
        TelemetryFrame { t, hmd: Pose::default(), left: Pose::default(), right: Pose::default() }
    }

    #[test]
    fn trace_rejects_non_increasing_time() {
        let err = TelemetryTrace::new(vec![frame(0.0), frame(0.0)], None).unwrap_err();
        assert_eq!(err, ModelError::NonMonotonicTime { index: 1 });
        assert_eq!(TelemetryTrace::new(vec![], None).unwrap_err(), ModelError::EmptyTrace);
        assert!(TelemetryTrace::new(vec![frame(-1.0)], None).is_err());
        assert!(TelemetryTrace::new(vec![frame(f64::NAN)], None).is_err());
    }

    #[test]
    fn pose_rejects_bad_quaternion() {
        assert!(Pose::new(Vec3::ZERO, Quat::new(1.0, 0.01, 0.0, 0.0)).is_err());
        assert!(Pose::new(Vec3::new(f64::INFINITY, 0.0, 0.0), Quat::IDENTITY).is_err());
        assert!(Pose::new(Vec3::ZERO, Quat::IDENTITY).is_ok());
    }

    #[test]
    fn downsample_to_30hz() {
        let frames: Vec<_> = (0..=90).map(|i| frame(i as f64 / 90.0)).collect();
        let tr = TelemetryTrace::new(frames, Some(90.0)).unwrap();
        let ds = tr.downsample(30.0);
        assert_eq!(ds.len(), 31);
        assert_eq!(ds.nominal_rate_hz(), Some(30.0));
    }

    #[test]
    fn window_selects_half_open_interval() {
        let frames: Vec<_> = (0..10).map(|i| frame(i as f64)).collect();
        let tr = TelemetryTrace::new(frames, None).unwrap();
        let w = tr.window(2.0, 5.0);
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].t, 2.0);
        assert!(tr.window(5.0, 2.0).is_empty());
    }

    fn api() -> DeviceApiSample {
        DeviceApiSample {
            ipd_m: 0.063,
            render_timestamps: vec![0.0, 0.01],
            reported_resolution_mp: 7.0,
            reported_fov_deg: 97.0,
            host: None,
        }
    }

    #[test]
    fn bundle_enforces_tier_capability() {
        let tr = TelemetryTrace::new(vec![frame(0.0), frame(1.0)], None).unwrap();
        for tier in [AttackerTier::PrivilegedIII, AttackerTier::NonPrivileged] {
            let err = SessionBundle::new(tr.clone(), vec![], Some(api()), vec![], tier).unwrap_err();
            assert_eq!(err, ModelError::CapabilityViolation(tier));
        }
        for tier in [AttackerTier::PrivilegedI, AttackerTier::PrivilegedII] {
            assert!(SessionBundle::new(tr.clone(), vec![], Some(api()), vec![], tier).is_ok());
        }
    }

    #[test]
    fn device_api_validation() {
        let mut a = api();
        a.ipd_m = 0.049;
        assert_eq!(a.validate(), Err(ModelError::IpdOutOfRange(0.049)));
        let mut a = api();
        a.render_timestamps = vec![0.0, 0.0];
        assert_eq!(a.validate(), Err(ModelError::RenderTimestampsNotIncreasing));
    }

    #[test]
    fn masking_drops_inputs_per_tier() {
        let frames: Vec<_> = (0..=90).map(|i| frame(i as f64 / 90.0)).collect();
        let tr = TelemetryTrace::new(frames, Some(90.0)).unwrap();
        let lat = vec![LatencySample { server_id: "a".into(), rtt_s: 0.01, t: 0.0 }];
        let full = SessionBundle::new(tr, vec![], Some(api()), lat, AttackerTier::PrivilegedII).unwrap();

        let p1 = full.masked_for(AttackerTier::PrivilegedI);
        assert!(p1.device_api().is_some() && p1.latency().is_empty() && p1.trace().len() == 91);
        let p3 = full.masked_for(AttackerTier::PrivilegedIII);
        assert!(p3.device_api().is_none() && !p3.latency().is_empty() && p3.trace().len() == 31);
        let np = full.masked_for(AttackerTier::NonPrivileged);
        assert!(np.device_api().is_none() && np.latency().is_empty() && np.trace().len() == 31);
    }
}

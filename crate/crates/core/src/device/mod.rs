//! Headset and host identification from timing and API readings.

use crate::model::{DeviceApiSample, EventPayload, EventRecord, TelemetryTrace};
use crate::sim::{DeviceSpec, UFO_RATES_HZ};
use crate::stats::median;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const MIN_TRACKING_FRAMES: usize = 100;
/// Half-width, relative to the coarse estimate, of the gap window used to
/// refine the histogram mode.
const REFINE_WINDOW: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("need at least {MIN_TRACKING_FRAMES} frames, got {0}")]
    TooFewFrames(usize),
    #[error("device API not available to this attacker")]
    CapabilityDenied,
    #[error("no refresh-rate puzzle answer")]
    MissingUfoAnswer,
    #[error("too few render timestamps")]
    TooFewTimestamps,
    #[error("device table is empty")]
    EmptyTable,
    #[error("features match several devices equally")]
    UnknownDevice,
}

/// Rate in Hz from increasing timestamps: 1 Hz histogram of 1/Δt, the
/// mode bin as a coarse estimate, then the median of 1/Δt over gaps within
/// ±25% of it, applied twice. The median step keeps timing jitter from
/// shifting the estimate by whole bins.
pub fn rate_from_times(times: &[f64]) -> Option<f64> {
    let rates: Vec<f64> = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .map(|d| 1.0 / d)
        .collect();
    let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
    for r in &rates {
        *hist.entry(r.round() as i64).or_default() += 1;
    }
    // Highest count; lowest bin on ties.
    let mode = hist.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?.0;
    let mut est = *mode as f64;
    for _ in 0..2 {
        let near: Vec<f64> = rates.iter().copied().filter(|r| (r - est).abs() <= REFINE_WINDOW * est).collect();
        est = median(&near).unwrap_or(est);
    }
    Some(est)
}

/// Tracking rate after dropping frames that repeat the previous poses.
pub fn estimate_tracking_rate(trace: &TelemetryTrace) -> Result<f64, DeviceError> {
    let frames = trace.frames();
    if frames.len() < MIN_TRACKING_FRAMES {
        return Err(DeviceError::TooFewFrames(frames.len()));
    }
    let mut times = Vec::with_capacity(frames.len());
    let mut prev: Option<&crate::model::TelemetryFrame> = None;
    for f in frames {
        if prev.is_none_or(|p| !f.same_poses(p)) {
            times.push(f.t);
        }
        prev = Some(f);
    }
    rate_from_times(&times).ok_or(DeviceError::TooFewFrames(times.len()))
}

/// Display refresh rate from render timestamps.
pub fn estimate_refresh_rate(device_api: Option<&DeviceApiSample>) -> Result<f64, DeviceError> {
    let api = device_api.ok_or(DeviceError::CapabilityDenied)?;
    rate_from_times(&api.render_timestamps).ok_or(DeviceError::TooFewTimestamps)
}

/// Refresh band `[lo, hi)` implied by how many balloon animations the
/// player could tell apart; `hi` is `None` above the fastest one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefreshBand {
    pub lo: f64,
    pub hi: Option<f64>,
}

pub fn refresh_band(distinct_count: u32) -> RefreshBand {
    let c = (distinct_count as usize).min(UFO_RATES_HZ.len());
    let lo = if c == 0 { 0.0 } else { UFO_RATES_HZ[c - 1] };
    RefreshBand { lo, hi: UFO_RATES_HZ.get(c).copied() }
}

pub fn estimate_refresh_band(events: &[EventRecord]) -> Result<RefreshBand, DeviceError> {
    events
        .iter()
        .rev()
        .find_map(|e| match e.payload {
            EventPayload::UfoAnswer { distinct_count } => Some(refresh_band(distinct_count)),
            _ => None,
        })
        .ok_or(DeviceError::MissingUfoAnswer)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceFeatures {
    pub tracking_hz: f64,
    pub refresh_hz: Option<f64>,
    pub resolution_mp: Option<f64>,
    pub fov_deg: Option<f64>,
}

/// Nearest table row under L1 distance, each feature scaled by its range
/// over the table.
pub fn classify_device<'a>(features: &DeviceFeatures, table: &'a [DeviceSpec]) -> Result<&'a str, DeviceError> {
    if table.is_empty() {
        return Err(DeviceError::EmptyTable);
    }
    let range = |get: fn(&DeviceSpec) -> f64| {
        let (lo, hi) = table.iter().map(get).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if hi > lo {
            hi - lo
        } else {
            1.0
        }
    };
    type Term = (Option<f64>, fn(&DeviceSpec) -> f64);
    let terms: [Term; 4] = [
        (Some(features.tracking_hz), |d| d.tracking_rate_hz),
        (features.refresh_hz, |d| d.hmd_refresh_hz),
        (features.resolution_mp, |d| d.resolution_mp),
        (features.fov_deg, |d| d.fov_deg),
    ];
    let scales: Vec<f64> = terms.iter().map(|(_, g)| range(*g)).collect();
    let dist = |d: &DeviceSpec| -> f64 {
        terms
            .iter()
            .zip(&scales)
            .filter_map(|((v, g), s)| v.map(|v| (v - g(d)).abs() / s))
            .sum()
    };
    let mut scored: Vec<(f64, &DeviceSpec)> = table.iter().map(|d| (dist(d), d)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    if scored.len() > 1 && (scored[1].0 - scored[0].0).abs() <= 1e-9 {
        return Err(DeviceError::UnknownDevice);
    }
    Ok(&scored[0].1.model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HostTier {
    Budget,
    Midrange,
    Highend,
}

impl HostTier {
    pub fn name(self) -> &'static str {
        match self {
            HostTier::Budget => "budget",
            HostTier::Midrange => "midrange",
            HostTier::Highend => "highend",
        }
    }
}

pub fn host_tier(cpu_ghz: f64, gpu_mhs: f64) -> HostTier {
    if gpu_mhs >= 80.0 && cpu_ghz >= 4.0 {
        HostTier::Highend
    } else if gpu_mhs < 30.0 {
        HostTier::Budget
    } else {
        HostTier::Midrange
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::model::{Pose, TelemetryFrame};
    use crate::sim::DeviceTable;

    fn moving_trace(rate: f64, n: usize) -> TelemetryTrace {
        let frames = (0..n)
            .map(|i| {
                let p = Pose::at(Vec3::new(i as f64 * 1e-3, 1.6, 0.0));
                TelemetryFrame { t: i as f64 / rate, hmd: p, left: p, right: p }
            })
            .collect();
        TelemetryTrace::new(frames, Some(rate)).unwrap()
    }

    #[test]
    fn ideal_rates() {
        for rate in [72.0, 90.0, 120.0, 144.0] {
            let r = estimate_tracking_rate(&moving_trace(rate, 1000)).unwrap();
            assert!((r - rate).abs() < 1e-6, "{rate} -> {r}");
        }
        assert_eq!(estimate_tracking_rate(&moving_trace(90.0, 50)), Err(DeviceError::TooFewFrames(50)));
    }

    #[test]
    fn stale_polls_halve_rate() {
        let base = moving_trace(120.0, 1000);
        let frames: Vec<TelemetryFrame> = base
            .frames()
            .iter()
            .enumerate()
            .map(|(i, f)| if i % 2 == 1 { TelemetryFrame { t: f.t, ..base.frames()[i - 1] } } else { *f })
            .collect();
        let r = estimate_tracking_rate(&TelemetryTrace::new(frames, None).unwrap()).unwrap();
        assert!((r - 60.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn ufo_bands() {
        assert_eq!(refresh_band(3), RefreshBand { lo: 90.0, hi: Some(120.0) });
        assert_eq!(refresh_band(5), RefreshBand { lo: 144.0, hi: None });
        assert_eq!(refresh_band(0), RefreshBand { lo: 0.0, hi: Some(30.0) });
        assert_eq!(estimate_refresh_band(&[]), Err(DeviceError::MissingUfoAnswer));
    }

    #[test]
    fn refresh_from_render_times() {
        let api = DeviceApiSample {
            ipd_m: 0.063,
            render_timestamps: (0..600).map(|i| 1.0 + i as f64 / 120.0).collect(),
            reported_resolution_mp: 12.0,
            reported_fov_deg: 120.0,
            host: None,
        };
        assert!((estimate_refresh_rate(Some(&api)).unwrap() - 120.0).abs() < 1e-6);
        assert_eq!(estimate_refresh_rate(None), Err(DeviceError::CapabilityDenied));
    }

    #[test]
    fn classify_against_shipped_table() {
        let t = DeviceTable::shipped();
        let f = DeviceFeatures { tracking_hz: 90.0, refresh_hz: Some(90.0), resolution_mp: Some(4.6), fov_deg: None };
        assert_eq!(classify_device(&f, &t.devices), Ok("HTC Vive"));
        let tie = DeviceFeatures { tracking_hz: 76.0, ..Default::default() };
        assert_eq!(classify_device(&tie, &t.devices), Err(DeviceError::UnknownDevice));
        assert_eq!(classify_device(&f, &[]), Err(DeviceError::EmptyTable));
    }

    #[test]
    fn host_tiers() {
        assert_eq!(host_tier(4.9, 120.0), HostTier::Highend);
        assert_eq!(host_tier(2.0, 10.0), HostTier::Budget);
        assert_eq!(host_tier(3.5, 50.0), HostTier::Midrange);
    }
}

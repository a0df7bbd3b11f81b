//! Physical-environment attributes: play-area extent from head positions
//! and coarse location from server round-trip times.

pub mod geo;

pub use geo::{
    default_servers, geolocate, great_circle_m, parse_servers_json, rtt_to_distance, GeoError, GeoEstimate, GeoPoint,
    PropagationModel, ServerSite,
};

use crate::model::TelemetryTrace;
use crate::stats::percentile_sorted;
use serde::{Deserialize, Serialize};

/// Body clearance added to each axis of the head's travel range.
pub const ROOM_MARGIN_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomDims {
    pub length_m: f64,
    pub width_m: f64,
    /// length × width rounded to 1 m².
    pub area_m2: f64,
}

/// Room extent from the p1-p99 range of head x (length) and z (width).
pub fn estimate_room_dims(trace: &TelemetryTrace) -> RoomDims {
    let extent = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        percentile_sorted(&v, 99.0) - percentile_sorted(&v, 1.0)
    };
    let frames = trace.frames();
    let length_m = extent(frames.iter().map(|f| f.hmd.position.x).collect()) + ROOM_MARGIN_M;
    let width_m = extent(frames.iter().map(|f| f.hmd.position.z).collect()) + ROOM_MARGIN_M;
    RoomDims { length_m, width_m, area_m2: (length_m * width_m).round() }
}

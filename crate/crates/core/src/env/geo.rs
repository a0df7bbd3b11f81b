//! Great-circle geometry, RTT-to-distance conversion and latency
//! multilateration on the sphere.

use crate::model::LatencySample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const GRID_STEP_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Self {
        GeoPoint { lat_deg, lon_deg }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSite {
    pub server_id: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl ServerSite {
    pub fn new(id: &str, lat_deg: f64, lon_deg: f64) -> Self {
        ServerSite { server_id: id.to_string(), lat_deg, lon_deg }
    }

    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.lat_deg, self.lon_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationModel {
    /// Effective one-way signal speed, m/s.
    pub v_eff: f64,
    pub proc_offset_s: f64,
}

impl Default for PropagationModel {
    /// Fiber speed divided by a route-inflation factor of 1.5, plus 5 ms of
    /// fixed processing delay.
    fn default() -> Self {
        PropagationModel { v_eff: 2.0e8 / 1.5, proc_offset_s: 0.005 }
    }
}

impl PropagationModel {
    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.v_eff > 0.0 && self.v_eff <= 3.0e8) || !(self.proc_offset_s >= 0.0 && self.proc_offset_s.is_finite()) {
            return Err(GeoError::InvalidModel);
        }
        Ok(())
    }

    /// Round-trip time for a one-way distance, without jitter.
    pub fn distance_to_rtt(&self, distance_m: f64) -> f64 {
        2.0 * distance_m / self.v_eff + self.proc_offset_s
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("need samples from at least 3 distinct known servers, got {0}")]
    InsufficientServers(usize),
    #[error("server {0:?} listed more than once")]
    DuplicateServer(String),
    #[error("server {0:?} has coordinates out of range")]
    InvalidServer(String),
    #[error("propagation speed must be in (0, 3e8] m/s and offset non-negative")]
    InvalidModel,
    #[error("servers file: {0}")]
    Parse(String),
}

pub fn validate_servers(servers: &[ServerSite]) -> Result<(), GeoError> {
    let mut seen = BTreeSet::new();
    for s in servers {
        let lat_ok = (-90.0..=90.0).contains(&s.lat_deg);
        let lon_ok = s.lon_deg > -180.0 && s.lon_deg <= 180.0;
        if !lat_ok || !lon_ok {
            return Err(GeoError::InvalidServer(s.server_id.clone()));
        }
        if !seen.insert(s.server_id.as_str()) {
            return Err(GeoError::DuplicateServer(s.server_id.clone()));
        }
    }
    Ok(())
}

pub fn parse_servers_json(text: &str) -> Result<Vec<ServerSite>, GeoError> {
    let servers: Vec<ServerSite> = serde_json::from_str(text).map_err(|e| GeoError::Parse(e.to_string()))?;
    validate_servers(&servers)?;
    Ok(servers)
}

/// The four vantage servers shipped with the toolkit.
pub fn default_servers() -> Vec<ServerSite> {
    parse_servers_json(include_str!("../../data/servers.json")).expect("shipped servers.json is valid")
}

/// Central angle between two points, radians (haversine form).
pub fn central_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat_deg.to_radians(), b.lat_deg.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin()
}

pub fn great_circle_m(a: GeoPoint, b: GeoPoint) -> f64 {
    EARTH_RADIUS_M * central_angle(a, b)
}

pub fn rtt_to_distance(rtt_s: f64, model: &PropagationModel) -> f64 {
    ((rtt_s - model.proc_offset_s) / 2.0).max(0.0) * model.v_eff
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoEstimate {
    pub lat_deg: f64,
    pub lon_deg: f64,
    /// Root-mean-square of the distance residuals, meters.
    pub residual_m: f64,
    /// False when refinement failed to converge and the grid best was kept.
    pub converged: bool,
}

impl GeoEstimate {
    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.lat_deg, self.lon_deg)
    }
}

struct Target {
    site: GeoPoint,
    distance_m: f64,
}

fn objective(p: GeoPoint, targets: &[Target]) -> f64 {
    targets.iter().map(|t| (great_circle_m(p, t.site) - t.distance_m).powi(2)).sum()
}

/// Least-squares position from RTT samples: a 5 degree grid scan followed by
/// damped Gauss-Newton refinement from the best grid nodes. Samples for the
/// same server are averaged before conversion to distance; samples for
/// unknown servers are ignored.
pub fn geolocate(samples: &[LatencySample], servers: &[ServerSite], model: &PropagationModel) -> Result<GeoEstimate, GeoError> {
    model.validate()?;
    validate_servers(servers)?;
    let sites: BTreeMap<&str, GeoPoint> = servers.iter().map(|s| (s.server_id.as_str(), s.point())).collect();
    let mut rtts: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in samples {
        if sites.contains_key(s.server_id.as_str()) {
            rtts.entry(s.server_id.as_str()).or_default().push(s.rtt_s);
        }
    }
    if rtts.len() < 3 {
        return Err(GeoError::InsufficientServers(rtts.len()));
    }
    let targets: Vec<Target> = rtts
        .iter()
        .map(|(id, v)| Target {
            site: sites[id],
            distance_m: rtt_to_distance(v.iter().sum::<f64>() / v.len() as f64, model),
        })
        .collect();

    let n_lat = (180.0 / GRID_STEP_DEG) as usize + 1;
    let n_lon = (360.0 / GRID_STEP_DEG) as usize;
    let mut grid: Vec<(f64, GeoPoint)> = (0..n_lat)
        .into_par_iter()
        .flat_map_iter(|i| {
            let lat = -90.0 + i as f64 * GRID_STEP_DEG;
            let targets = &targets;
            (0..n_lon).map(move |j| {
                let p = GeoPoint::new(lat, -180.0 + j as f64 * GRID_STEP_DEG);
                (objective(p, targets), p)
            })
        })
        .collect();
    // Stable sort keeps scan order among ties, so the result does not depend
    // on how the scan was partitioned.
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (grid_f, grid_p) = grid[0];
    let mut best = (grid_f, grid_p, false);
    for &(f0, p0) in grid.iter().take(4) {
        let (f, p, ok) = refine(p0, f0, &targets);
        if f < best.0 || (ok && !best.2 && f <= best.0) {
            best = (f, p, ok);
        }
    }
    let (f, p, converged) = best;
    Ok(GeoEstimate {
        lat_deg: p.lat_deg,
        lon_deg: p.lon_deg,
        residual_m: (f / targets.len() as f64).sqrt(),
        converged,
    })
}

fn normalize(lat: f64, lon: f64) -> GeoPoint {
    let (mut lat, mut lon) = (lat, lon);
    if lat > 90.0 {
        lat = 180.0 - lat;
        lon += 180.0;
    } else if lat < -90.0 {
        lat = -180.0 - lat;
        lon += 180.0;
    }
    lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if lon == -180.0 {
        lon = 180.0;
    }
    GeoPoint::new(lat, lon)
}

/// Gauss-Newton with Levenberg damping; a step is taken only when it lowers
/// the objective, so the result is never worse than the start.
fn refine(start: GeoPoint, f_start: f64, targets: &[Target]) -> (f64, GeoPoint, bool) {
    let mut p = start;
    let mut f = f_start;
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (phi, lam) = (p.lat_deg.to_radians(), p.lon_deg.to_radians());
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for t in targets {
            let (ps, ls) = (t.site.lat_deg.to_radians(), t.site.lon_deg.to_radians());
            let sigma = central_angle(p, t.site);
            let r = EARTH_RADIUS_M * sigma - t.distance_m;
            let s = sigma.sin().max(1e-12);
            let dl = lam - ls;
            let j1 = -EARTH_RADIUS_M * (phi.cos() * ps.sin() - phi.sin() * ps.cos() * dl.cos()) / s;
            let j2 = EARTH_RADIUS_M * (phi.cos() * ps.cos() * dl.sin()) / s;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        let scale = (a11 + a22).max(1e-300);
        let mut step = None;
        for _ in 0..60 {
            let (b11, b22) = (a11 + lambda * scale, a22 + lambda * scale);
            let det = b11 * b22 - a12 * a12;
            let d1 = -(b22 * g1 - a12 * g2) / det;
            let d2 = -(-a12 * g1 + b11 * g2) / det;
            if det > 0.0 && d1.is_finite() && d2.is_finite() {
                let cand = normalize(p.lat_deg + d1.to_degrees(), p.lon_deg + d2.to_degrees());
                let fc = objective(cand, targets);
                if fc < f {
                    step = Some((cand, fc, d1.hypot(d2)));
                    lambda = (lambda * 0.3).max(1e-15);
                    break;
                }
            }
            lambda *= 4.0;
        }
        match step {
            // No descent direction left at double precision: a stationary point.
            None => return (f, p, true),
            Some((cand, fc, norm)) => {
                p = cand;
                f = fc;
                if norm < 1e-14 {
                    return (f, p, true);
                }
            }
        }
    }
    (f, p, false)
}

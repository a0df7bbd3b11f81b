use super::SimError;
use crate::env::{great_circle_m, GeoPoint, PropagationModel, ServerSite};
use crate::model::LatencySample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Probes sent to each server during a session.
pub const PROBES_PER_SERVER: usize = 16;

/// RTT probes from `location` to every server: `probes` per server, one
/// every 0.5 s, rtt = 2 d / v_eff + offset + N(0, jitter), floored at 0.
pub fn simulate_latency(
    location: GeoPoint,
    servers: &[ServerSite],
    model: &PropagationModel,
    jitter_sigma_s: f64,
    probes: usize,
    seed: u64,
) -> Result<Vec<LatencySample>, SimError> {
    if servers.is_empty() {
        return Err(SimError::NoServers);
    }
    if !(jitter_sigma_s.is_finite() && jitter_sigma_s >= 0.0) {
        return Err(SimError::InvalidNoise("rtt jitter must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, jitter_sigma_s).expect("checked sigma");
    let mut out = Vec::with_capacity(servers.len() * probes);
    for k in 0..probes {
        for s in servers {
            let base = model.distance_to_rtt(great_circle_m(location, s.point()));
            out.push(LatencySample {
                server_id: s.server_id.clone(),
                rtt_s: (base + jitter.sample(&mut rng)).max(0.0),
                t: k as f64 * 0.5,
            });
        }
    }
    Ok(out)
}

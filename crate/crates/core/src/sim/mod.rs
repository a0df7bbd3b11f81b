//! Ground-truth oracle: user profiles, scripted play-throughs rendered into
//! telemetry and event logs, and latency probes.

mod devices;
mod latency;
mod population;
mod script;
mod session;

pub use devices::{DeviceSpec, DeviceTable};
pub use latency::{simulate_latency, PROBES_PER_SERVER};
pub use population::{
    sample_population, sample_profile, user_id, Disability, Ethnicity, Fitness, Gender, MocaAnswers, Severity,
    UserProfile, SITES,
};
pub use script::{MotionPrimitive, ScenarioScript, ScriptError, Segment, MOCA_PUZZLES, PASSWORD_PUZZLES};
pub use session::{simulate_session, user_traits, UserTraits, REACTION_PUZZLE, UFO_RATES_HZ};

use crate::env::{PropagationModel, ServerSite};
use crate::model::SessionBundle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A session together with latency probes from the user's location.
pub fn simulate_with_latency(
    profile: &UserProfile,
    script: &ScenarioScript,
    noise: &NoiseModel,
    servers: &[ServerSite],
    propagation: &PropagationModel,
    seed: u64,
) -> Result<SessionBundle, SimError> {
    let bundle = simulate_session(profile, script, noise, seed)?;
    let latency = simulate_latency(
        profile.location,
        servers,
        propagation,
        noise.rtt_jitter_sigma_s,
        PROBES_PER_SERVER,
        derive_seed(seed, 5),
    )?;
    Ok(bundle.with_latency(latency).expect("simulated probes are valid"))
}

/// Deterministic sub-seed for stream `stream` of `seed` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to key per-user streams by id.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-axis Gaussian on every tracked position.
    pub pos_sigma_m: f64,
    /// Per-axis Gaussian rotation vector applied to every orientation.
    pub ori_sigma_rad: f64,
    pub eye_offset_mean_m: f64,
    pub eye_offset_sigma_m: f64,
    pub grip_offset_mean_m: f64,
    pub grip_offset_sigma_m: f64,
    pub rtt_jitter_sigma_s: f64,
    pub seed: u64,
    /// Gaussian jitter on frame and render timestamps.
    #[serde(default)]
    pub timing_jitter_sigma_s: f64,
    /// Press-to-press spread around the user's reaction time.
    #[serde(default)]
    pub reaction_sigma_s: f64,
    /// Device-reported IPD error; headsets without a continuous IPD
    /// readout use a multiple of it.
    #[serde(default)]
    pub ipd_sigma_m: f64,
    /// Mean distance the user keeps from the walls while exploring.
    #[serde(default = "default_clearance")]
    pub wall_clearance_mean_m: f64,
    #[serde(default)]
    pub wall_clearance_sigma_m: f64,
    /// Spread of squat depth (fraction of height) around the fitness class mean.
    #[serde(default)]
    pub squat_ratio_sigma: f64,
}

fn default_clearance() -> f64 {
    0.25
}

impl NoiseModel {
    /// The calibrated model: 1 cm positions, 0.5 ms timing, 5 ms RTT.
    pub fn calibrated(seed: u64) -> Self {
        NoiseModel {
            pos_sigma_m: 0.01,
            ori_sigma_rad: 0.005,
            eye_offset_mean_m: 0.11,
            eye_offset_sigma_m: 0.01,
            grip_offset_mean_m: 0.05,
            grip_offset_sigma_m: 0.01,
            rtt_jitter_sigma_s: 0.005,
            seed,
            timing_jitter_sigma_s: 0.0005,
            reaction_sigma_s: 0.012,
            ipd_sigma_m: 0.00015,
            wall_clearance_mean_m: 0.25,
            wall_clearance_sigma_m: 0.10,
            squat_ratio_sigma: 0.03,
        }
    }

    /// All sigmas zero, offsets at their means.
    pub fn noiseless(seed: u64) -> Self {
        NoiseModel {
            pos_sigma_m: 0.0,
            ori_sigma_rad: 0.0,
            eye_offset_mean_m: 0.11,
            eye_offset_sigma_m: 0.0,
            grip_offset_mean_m: 0.05,
            grip_offset_sigma_m: 0.0,
            rtt_jitter_sigma_s: 0.0,
            seed,
            timing_jitter_sigma_s: 0.0,
            reaction_sigma_s: 0.0,
            ipd_sigma_m: 0.0,
            wall_clearance_mean_m: 0.25,
            wall_clearance_sigma_m: 0.0,
            squat_ratio_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let sigmas = [
            self.pos_sigma_m,
            self.ori_sigma_rad,
            self.eye_offset_sigma_m,
            self.grip_offset_sigma_m,
            self.rtt_jitter_sigma_s,
            self.timing_jitter_sigma_s,
            self.reaction_sigma_s,
            self.ipd_sigma_m,
            self.wall_clearance_sigma_m,
            self.squat_ratio_sigma,
        ];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(SimError::InvalidNoise("sigmas must be finite and non-negative".into()));
        }
        let means = [self.eye_offset_mean_m, self.grip_offset_mean_m, self.wall_clearance_mean_m];
        if means.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(SimError::InvalidNoise("offsets must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("script has no segments")]
    EmptyScript,
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("no servers to probe")]
    NoServers,
}

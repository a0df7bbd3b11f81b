//! Bounded Laplace noise on tracked positions.

use crate::geom::Vec3;
use crate::model::{Pose, TelemetryFrame, TelemetryTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Draws beyond this count fall back to a uniform draw within bounds.
const MAX_REDRAWS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DefenseError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("bounds must be finite with lo < hi")]
    InvalidBounds,
}

/// Per-axis position bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl Default for Bounds {
    /// A 6 x 6 m play space, floor to 2.5 m.
    fn default() -> Self {
        Bounds { x: (-3.0, 3.0), y: (0.0, 2.5), z: (-3.0, 3.0) }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<(), DefenseError> {
        for (lo, hi) in [self.x, self.y, self.z] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(DefenseError::InvalidBounds);
            }
        }
        Ok(())
    }
}

fn laplace(rng: &mut impl Rng, scale: f64) -> f64 {
    let u: f64 = rng.random_range(-0.5..0.5);
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One coordinate: Laplace noise of scale (hi - lo) / epsilon, redrawn
/// until the result lies in [lo, hi].
pub fn bounded_laplace(rng: &mut impl Rng, x: f64, (lo, hi): (f64, f64), epsilon: f64) -> f64 {
    let x = x.clamp(lo, hi);
    let scale = (hi - lo) / epsilon;
    for _ in 0..MAX_REDRAWS {
        let y = x + laplace(rng, scale);
        if (lo..=hi).contains(&y) {
            return y;
        }
    }
    rng.random_range(lo..=hi)
}

pub fn apply_bounded_laplace(
    trace: &TelemetryTrace,
    epsilon: f64,
    bounds: &Bounds,
    seed: u64,
) -> Result<TelemetryTrace, DefenseError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(DefenseError::InvalidEpsilon(epsilon));
    }
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = |p: &Pose| {
        let q = p.position;
        Pose {
            position: Vec3::new(
                bounded_laplace(&mut rng, q.x, bounds.x, epsilon),
                bounded_laplace(&mut rng, q.y, bounds.y, epsilon),
                bounded_laplace(&mut rng, q.z, bounds.z, epsilon),
            ),
            orientation: p.orientation,
        }
    };
    let out = trace
        .map_frames(|f| TelemetryFrame { t: f.t, hmd: noisy(&f.hmd), left: noisy(&f.left), right: noisy(&f.right) })
        .expect("timing and orientation unchanged");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> TelemetryTrace {
        let frames = (0..200)
            .map(|i| {
                let p = Pose::at(Vec3::new(0.3, 1.6, -0.2));
                TelemetryFrame { t: i as f64 / 90.0, hmd: p, left: p, right: p }
            })
            .collect();
        TelemetryTrace::new(frames, Some(90.0)).unwrap()
    }

    #[test]
    fn huge_epsilon_is_identity() {
        let t = trace();
        let out = apply_bounded_laplace(&t, 1e9, &Bounds::default(), 3).unwrap();
        for (a, b) in t.frames().iter().zip(out.frames()) {
            assert!((a.hmd.position - b.hmd.position).norm() < 1e-6);
            assert_eq!(a.hmd.orientation, b.hmd.orientation);
            assert_eq!(a.t, b.t);
        }
    }

    #[test]
    fn draws_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1_000_000 {
            let y = bounded_laplace(&mut rng, 0.9, (0.0, 1.0), 0.5);
            assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn bad_parameters() {
        let t = trace();
        assert_eq!(apply_bounded_laplace(&t, 0.0, &Bounds::default(), 1), Err(DefenseError::InvalidEpsilon(0.0)));
        let b = Bounds { x: (1.0, 1.0), ..Bounds::default() };
        assert_eq!(apply_bounded_laplace(&t, 1.0, &b, 1), Err(DefenseError::InvalidBounds));
    }
}

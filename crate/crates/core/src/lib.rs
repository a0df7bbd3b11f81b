//! Telemetry privacy attacks on VR users.
//!
//! A seeded simulator produces labeled play-through sessions; extractors
//! recover personal attributes from them under attacker-tier capability
//! limits; the evaluator scores recovered attributes against ground truth;
//! a bounded Laplace mechanism perturbs positions as a defense.

pub mod anthro;
pub mod behavior;
pub mod defense;
pub mod device;
pub mod env;
pub mod evaluate;
pub mod geom;
pub mod inference;
pub mod model;
pub mod pipeline;
pub mod sim;
pub mod stats;

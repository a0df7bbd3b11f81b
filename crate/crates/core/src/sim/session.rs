//! Renders a scripted play-through for one user into telemetry, events and
//! device API readings.

use super::population::{Fitness, MocaAnswers, UserProfile};
use super::script::{MotionPrimitive, ScenarioScript, Segment, PASSWORD_PUZZLES};
use super::{derive_seed, hash_str, NoiseModel, SimError};
use crate::behavior::layout::PanelLayout;
use crate::behavior::moca::{self, month_name, MocaKey};
use crate::geom::{Quat, Vec3};
use crate::model::{
    AttackerTier, DeviceApiSample, EventPayload, EventRecord, Hand, Pose, ReadRange, SessionBundle, TelemetryFrame,
    TelemetryTrace, IPD_RANGE_M,
};
use crate::stats::round_to_fraction;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};

pub const REACTION_PUZZLE: u8 = 11;
pub const UFO_PUZZLE: u8 = 15;
pub const GAZE_PUZZLE: u8 = 13;
pub const COLOR_PUZZLE: u8 = 5;
/// Balloon animation rates shown in the refresh-rate puzzle.
pub const UFO_RATES_HZ: [f64; 5] = [30.0, 60.0, 90.0, 120.0, 144.0];

const DOMINANT_PRESS_P: f64 = 0.97;
const STIMULI: usize = 7;
const SHOULDER_DROP_M: f64 = 0.15;
const REST_HEIGHT_FRACTION: f64 = 0.45;
const REST_SIDE_M: f64 = 0.22;
const REST_FORWARD_M: f64 = -0.10;
const PRESS_REACH_M: f64 = 0.30;
const PRESS_HALF_WIDTH_S: f64 = 0.2;
const RENDER_CAPTURE_START_S: f64 = 1.0;
const RENDER_CAPTURE_S: f64 = 5.0;
/// Headsets whose API reports a continuously measured IPD; the rest get a
/// five times larger reporting error.
const PRECISE_IPD_MODELS: [&str; 1] = ["HTC Vive Pro 2"];

/// Per-user quantities that stay fixed across that user's sessions under a
/// given noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserTraits {
    pub eye_offset_m: f64,
    pub grip_offset_m: f64,
    /// Squat depth as a fraction of height.
    pub squat_ratio: f64,
    pub wall_clearance_m: f64,
    pub ipd_report_error_m: f64,
    pub close_read_ok: bool,
    pub far_read_ok: bool,
}

pub fn user_traits(profile: &UserProfile, noise: &NoiseModel) -> UserTraits {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, hash_str(&profile.user_id)));
    let mut gauss = |mean: f64, sd: f64| {
        let z: f64 = rng.sample(StandardNormal);
        mean + sd * z
    };
    let eye_offset_m = gauss(noise.eye_offset_mean_m, noise.eye_offset_sigma_m).clamp(0.0, 0.3);
    let grip_offset_m = gauss(noise.grip_offset_mean_m, noise.grip_offset_sigma_m).clamp(0.0, 0.15);
    let ratio_mean = match profile.fitness {
        Fitness::Low => 0.15,
        Fitness::Moderate => 0.30,
        Fitness::High => 0.45,
    };
    let squat_ratio = gauss(ratio_mean, noise.squat_ratio_sigma).clamp(0.02, 0.7);
    let max_clear = (profile.room_length_m.min(profile.room_width_m) / 2.0 - 0.05).max(0.0);
    let wall_clearance_m = gauss(noise.wall_clearance_mean_m, noise.wall_clearance_sigma_m).clamp(0.0, max_clear);
    let ipd_scale = if PRECISE_IPD_MODELS.contains(&profile.device.model.as_str()) { 1.0 } else { 5.0 };
    let ipd_report_error_m = gauss(0.0, noise.ipd_sigma_m * ipd_scale);
    let close_read_ok = !rng.random_bool(profile.hyperopia.read_failure_probability());
    let far_read_ok = !rng.random_bool(profile.myopia.read_failure_probability());
    UserTraits { eye_offset_m, grip_offset_m, squat_ratio, wall_clearance_m, ipd_report_error_m, close_read_ok, far_read_ok }
}

struct Span<'a> {
    start: f64,
    end: f64,
    seg: &'a Segment,
}

impl Span<'_> {
    fn at(&self, fraction: f64) -> f64 {
        self.start + (self.end - self.start) * fraction
    }
}

fn timeline<'a>(script: &'a ScenarioScript, pace: f64) -> Vec<Span<'a>> {
    let mut t = 0.0;
    script
        .segments
        .iter()
        .map(|seg| {
            let start = t;
            t += seg.duration_s * pace;
            Span { start, end: t, seg }
        })
        .collect()
}

/// One play-through as seen by the client application (all inputs present).
/// Use [`SessionBundle::masked_for`] for other attacker tiers.
pub fn simulate_session(
    profile: &UserProfile,
    script: &ScenarioScript,
    noise: &NoiseModel,
    seed: u64,
) -> Result<SessionBundle, SimError> {
    if script.segments.is_empty() {
        return Err(SimError::EmptyScript);
    }
    script.validate()?;
    noise.validate()?;
    profile.validate().map_err(SimError::InvalidProfile)?;

    let traits = user_traits(profile, noise);
    let spans = timeline(script, profile.session_pace);
    let (events, presses) = plan_events(profile, &traits, &spans, noise, seed);
    let trace = render_trace(profile, &traits, &spans, &presses, noise, seed);
    let api = device_api(profile, &traits, noise, seed);
    let bundle = SessionBundle::new(trace, events, Some(api), Vec::new(), AttackerTier::PrivilegedII)
        .expect("simulator output satisfies model invariants");
    Ok(bundle)
}

fn round60(x: f64) -> f64 {
    round_to_fraction(x, 60.0)
}

fn plan_events(
    profile: &UserProfile,
    traits: &UserTraits,
    spans: &[Span],
    noise: &NoiseModel,
    seed: u64,
) -> (Vec<EventRecord>, Vec<(f64, Hand)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut events = Vec::new();
    let mut presses = Vec::new();
    let push = |events: &mut Vec<EventRecord>, t: f64, puzzle: u8, payload: EventPayload| {
        events.push(EventRecord::new(t, puzzle, payload).expect("valid scripted event"));
    };

    let hand = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(DOMINANT_PRESS_P) {
            profile.handedness
        } else {
            profile.handedness.other()
        }
    };

    for (i, sp) in spans.iter().enumerate() {
        let puzzle = sp.seg.puzzle_id;
        let first_of_puzzle = i == 0 || spans[i - 1].seg.puzzle_id != puzzle;
        let last_of_puzzle = i + 1 == spans.len() || spans[i + 1].seg.puzzle_id != puzzle;
        if first_of_puzzle {
            push(&mut events, sp.start, puzzle, EventPayload::PuzzleEnter);
        }
        match sp.seg.primitive {
            MotionPrimitive::ButtonPress if puzzle == REACTION_PUZZLE => {
                for k in 0..STIMULI {
                    let ts = sp.at(0.1 + 0.12 * k as f64);
                    push(&mut events, ts, puzzle, EventPayload::StimulusShown);
                    let rt = if noise.reaction_sigma_s > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        round60(profile.reaction_time_s + noise.reaction_sigma_s * z).max(1.0 / 60.0)
                    } else {
                        profile.reaction_time_s
                    };
                    let h = hand(&mut rng);
                    push(&mut events, ts + rt, puzzle, EventPayload::ButtonPress { hand: h });
                    presses.push((ts + rt, h));
                }
            }
            MotionPrimitive::ButtonPress => {
                for f in [0.3, 0.5, 0.7] {
                    let h = hand(&mut rng);
                    push(&mut events, sp.at(f), puzzle, EventPayload::ButtonPress { hand: h });
                    presses.push((sp.at(f), h));
                }
            }
            MotionPrimitive::Idle if puzzle == UFO_PUZZLE => {
                let distinct = UFO_RATES_HZ.iter().filter(|&&r| r <= profile.device.hmd_refresh_hz).count() as u32;
                push(&mut events, sp.at(0.8), puzzle, EventPayload::UfoAnswer { distinct_count: distinct });
            }
            MotionPrimitive::ReadNear => {
                let p = EventPayload::ReadAttempt { success: traits.close_read_ok, range: ReadRange::Close };
                push(&mut events, sp.at(0.7), puzzle, p);
            }
            MotionPrimitive::ReadFar => {
                let p = EventPayload::ReadAttempt { success: traits.far_read_ok, range: ReadRange::Far };
                push(&mut events, sp.at(0.7), puzzle, p);
            }
            _ => {}
        }
        if PASSWORD_PUZZLES.contains(&puzzle) {
            let at = if sp.seg.primitive == MotionPrimitive::GazePanel {
                Some(sp.at(0.6))
            } else if last_of_puzzle && !spans_of(spans, puzzle).any(|s| s.seg.primitive == MotionPrimitive::GazePanel) {
                Some(sp.at(0.9))
            } else {
                None
            };
            if let Some(t) = at {
                let text = password_text(puzzle, profile);
                push(&mut events, t, puzzle, EventPayload::SpokenPassword { text });
            }
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    (events, presses)
}

fn spans_of<'a, 'b>(spans: &'a [Span<'b>], puzzle: u8) -> impl Iterator<Item = &'a Span<'b>> {
    spans.iter().filter(move |s| s.seg.puzzle_id == puzzle)
}

const PLAIN_PASSWORDS: [&str; 24] = [
    "orbit", "lantern", "harbor", "meadow", "", "copper", "", "falcon", "granite", "willow", "", "ember", "", "quartz",
    "", "", "", "", "", "", "cobalt", "", "", "",
];

fn gaze_word(lang: &str) -> &'static str {
    match lang {
        "hi" => "namaste",
        "zh" => "nihao",
        "fr" => "bonjour",
        "ja" => "konnichiwa",
        "ru" => "privet",
        "es" => "hola",
        "pt" => "ola",
        "ar" => "marhaba",
        _ => "hello",
    }
}

fn password_text(puzzle: u8, profile: &UserProfile) -> String {
    let key = MocaKey::default();
    let a = &profile.moca_answers;
    match puzzle {
        COLOR_PUZZLE => if profile.colorblind { "as" } else { "daisy" }.to_string(),
        GAZE_PUZZLE => gaze_word(profile.gaze_language.as_deref().unwrap_or("en")).to_string(),
        moca::MEMORY_PUZZLE => key.memory_words.join(" "),
        moca::NAMING_PUZZLE => (0..3)
            .map(|i| if i < a.naming as usize { key.animals[i][0].as_str() } else { "horse" })
            .collect::<Vec<_>>()
            .join(" "),
        moca::SERIAL7_PUZZLE => serial7_answers(&key, a).iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "),
        moca::RECALL_PUZZLE => key.memory_words[..a.recall as usize].join(" "),
        moca::ABSTRACTION_PUZZLE => {
            let wrong = ["fruit", "round"];
            (0..2)
                .map(|i| if i < a.abstraction as usize { key.abstraction[i][0].as_str() } else { wrong[i] })
                .collect::<Vec<_>>()
                .join("|")
        }
        moca::REPETITION_PUZZLE => (0..2)
            .map(|i| {
                let s = &key.sentences[i];
                if i < a.repetition as usize {
                    s.clone()
                } else {
                    // A dropped word.
                    s.rsplit_once(' ').map(|x| x.0.to_string()).unwrap_or_default()
                }
            })
            .collect::<Vec<_>>()
            .join("|"),
        moca::ORIENTATION_PUZZLE => orientation_answer(&key, a),
        _ => PLAIN_PASSWORDS[(puzzle - 1) as usize].to_string(),
    }
}

fn serial7_answers(key: &MocaKey, a: &MocaAnswers) -> Vec<i64> {
    let mut prev = key.serial_start;
    (0..5)
        .map(|i| {
            let n = if i < a.serial7 as usize { prev - 7 } else { prev - 6 };
            prev = n;
            n
        })
        .collect()
}

fn orientation_answer(key: &MocaKey, a: &MocaAnswers) -> String {
    let d = &key.date;
    let right = [d.year.to_string(), month_name(d.month).to_string(), d.day.to_string(), d.weekday.clone()];
    let wrong = [(d.year - 1).to_string(), month_name(d.month % 12 + 1).to_string(), (d.day % 28 + 1).to_string(), "someday".into()];
    (0..4)
        .map(|i| if i < a.orientation as usize { right[i].clone() } else { wrong[i].clone() })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Body state shared by all primitives before per-primitive adjustments.
struct Rig {
    height: f64,
    eye_y: f64,
    arm_left: f64,
    arm_right: f64,
    grip: f64,
    squat_depth: f64,
    half_x: f64,
    half_z: f64,
    gaze_target: Vec3,
}

fn sway(t: f64) -> (f64, f64) {
    (0.01 * (TAU * 0.23 * t).sin(), 0.01 * (TAU * 0.17 * t + 1.0).sin())
}

fn wobble(t: f64, scale: f64) -> Quat {
    let yaw = scale * 0.03 * (TAU * 0.11 * t).sin();
    let pitch = scale * 0.02 * (TAU * 0.13 * t + 0.5).sin();
    Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), yaw) * Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), pitch)
}

fn hand_wobble(t: f64, phase: f64) -> Quat {
    Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), 0.05 * (TAU * 0.3 * t + phase).sin())
}

fn lerp(a: Vec3, b: Vec3, s: f64) -> Vec3 {
    a + (b - a) * s
}

fn smooth(s: f64) -> f64 {
    0.5 - 0.5 * (PI * s.clamp(0.0, 1.0)).cos()
}

/// Squat profile over one cycle: up 30%, descend 20%, bottom 20%, rise 30%.
fn squat_shape(p: f64) -> f64 {
    match p {
        p if p < 0.3 => 0.0,
        p if p < 0.5 => smooth((p - 0.3) / 0.2),
        p if p < 0.7 => 1.0,
        p => 1.0 - smooth((p - 0.7) / 0.3),
    }
}

/// Corner tour: centre, four corners (15% dwell each), back to centre.
fn explore_xz(s: f64, hx: f64, hz: f64) -> (f64, f64) {
    let pts = [(0.0, 0.0), (-hx, -hz), (hx, -hz), (hx, hz), (-hx, hz), (0.0, 0.0)];
    // Phases: leg 8%, dwell 15%, ... leg 8%.
    let mut t = 0.0;
    for k in 0..5 {
        let (a, b) = (pts[k], pts[k + 1]);
        if s < t + 0.08 {
            let u = smooth((s - t) / 0.08);
            return (a.0 + (b.0 - a.0) * u, a.1 + (b.1 - a.1) * u);
        }
        t += 0.08;
        if k < 4 {
            if s < t + 0.15 {
                return b;
            }
            t += 0.15;
        }
    }
    (0.0, 0.0)
}

fn press_bump(t: f64, presses: &[(f64, Hand)], hand: Hand) -> f64 {
    let i = presses.partition_point(|p| p.0 < t - PRESS_HALF_WIDTH_S);
    presses[i..]
        .iter()
        .take_while(|p| p.0 <= t + PRESS_HALF_WIDTH_S)
        .filter(|p| p.1 == hand)
        .map(|p| 0.5 * (1.0 + (PI * (t - p.0) / PRESS_HALF_WIDTH_S).cos()))
        .fold(0.0, f64::max)
}

fn render_frame(rig: &Rig, sp: &Span, t: f64, presses: &[(f64, Hand)]) -> (Pose, Pose, Pose) {
    let s = ((t - sp.start) / (sp.end - sp.start)).clamp(0.0, 1.0);
    let (sx, sz) = sway(t);
    let up = Vec3::new(0.0, 1.0, 0.0);
    let rest_y = REST_HEIGHT_FRACTION * rig.height;
    let mut head = Vec3::new(sx, rig.eye_y, sz);
    let mut head_ori = wobble(t, 1.0);
    let mut yaw = 0.0;
    // Controller offsets from the head's ground projection, body frame.
    let mut left = Vec3::new(-REST_SIDE_M, rest_y, REST_FORWARD_M);
    let mut right = Vec3::new(REST_SIDE_M, rest_y, REST_FORWARD_M);

    match sp.seg.primitive {
        MotionPrimitive::Stand | MotionPrimitive::Idle => {}
        MotionPrimitive::Turn => {
            yaw = TAU * smooth(s);
            head_ori = Quat::from_axis_angle(up, yaw) * head_ori;
        }
        MotionPrimitive::ExploreRoom => {
            let (x, z) = explore_xz(s, rig.half_x, rig.half_z);
            head = Vec3::new(x, rig.eye_y, z);
        }
        MotionPrimitive::TPose => {
            let shoulder = rig.eye_y - SHOULDER_DROP_M;
            let l_ext = Vec3::new(-(rig.arm_left - rig.grip), shoulder, 0.0);
            let r_ext = Vec3::new(rig.arm_right - rig.grip, shoulder, 0.0);
            let k = if s < 0.2 {
                smooth(s / 0.2)
            } else if s <= 0.8 {
                1.0
            } else {
                1.0 - smooth((s - 0.8) / 0.2)
            };
            if k == 1.0 {
                left = l_ext;
                right = r_ext;
            } else {
                left = lerp(left, l_ext, k);
                right = lerp(right, r_ext, k);
            }
        }
        MotionPrimitive::Squat => {
            let cycle = (s * 3.0).min(2.999_999_999);
            let dip = rig.squat_depth * squat_shape(cycle.fract());
            head.y -= dip;
            left.y -= dip;
            right.y -= dip;
        }
        MotionPrimitive::ButtonPress => {
            left.z -= PRESS_REACH_M * press_bump(t, presses, Hand::Left);
            right.z -= PRESS_REACH_M * press_bump(t, presses, Hand::Right);
        }
        MotionPrimitive::GazePanel => {
            head_ori = Quat::looking_along(rig.gaze_target - head) * wobble(t, 0.3);
        }
        MotionPrimitive::ReadNear => {
            head_ori = wobble(t, 0.5) * Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), -0.35);
        }
        MotionPrimitive::ReadFar => {
            head_ori = wobble(t, 0.5) * Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), 0.05);
        }
    }

    let body = Quat::from_axis_angle(up, yaw);
    let place = |off: Vec3| {
        let h = body.rotate(Vec3::new(off.x, 0.0, off.z));
        Vec3::new(head.x + h.x, off.y, head.z + h.z)
    };
    let lp = Pose { position: place(left), orientation: body * hand_wobble(t, 0.0) };
    let rp = Pose { position: place(right), orientation: body * hand_wobble(t, 1.3) };
    (Pose { position: head, orientation: head_ori }, lp, rp)
}

fn perturb(p: Pose, rng: &mut ChaCha8Rng, noise: &NoiseModel) -> Pose {
    let mut out = p;
    if noise.pos_sigma_m > 0.0 {
        let mut d = [0.0; 3];
        for v in &mut d {
            let z: f64 = rng.sample(StandardNormal);
            *v = z * noise.pos_sigma_m;
        }
        out.position = out.position + Vec3::from_array(d);
    }
    if noise.ori_sigma_rad > 0.0 {
        let mut d = [0.0; 3];
        for v in &mut d {
            let z: f64 = rng.sample(StandardNormal);
            *v = z * noise.ori_sigma_rad;
        }
        out.orientation = (out.orientation * Quat::from_rotation_vector(Vec3::from_array(d))).normalized();
    }
    out
}

fn jittered_times(n: usize, rate: f64, start: f64, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = start + i as f64 / rate;
        if sigma > 0.0 && i > 0 {
            let z: f64 = rng.sample(StandardNormal);
            t += sigma * z;
        }
        if let Some(&prev) = out.last() {
            if t <= prev {
                t = prev + 1e-6;
            }
        }
        out.push(t.max(0.0));
    }
    out
}

fn render_trace(
    profile: &UserProfile,
    traits: &UserTraits,
    spans: &[Span],
    presses: &[(f64, Hand)],
    noise: &NoiseModel,
    seed: u64,
) -> TelemetryTrace {
    let eye_y = profile.height_m - traits.eye_offset_m;
    let layout = PanelLayout::shipped();
    let head_guess = Vec3::new(0.0, eye_y, 0.0);
    let gaze_target = match profile.gaze_language.as_deref().and_then(|l| layout.panel(l)) {
        Some(p) => p.center,
        // Nothing to read: look through the doorway on the side wall.
        None => head_guess + Vec3::new(5.0, 0.0, 0.0),
    };
    let rig = Rig {
        height: profile.height_m,
        eye_y,
        arm_left: profile.arm_left_m,
        arm_right: profile.arm_right_m,
        grip: traits.grip_offset_m,
        squat_depth: traits.squat_ratio * profile.height_m,
        half_x: profile.room_length_m / 2.0 - traits.wall_clearance_m,
        half_z: profile.room_width_m / 2.0 - traits.wall_clearance_m,
        gaze_target,
    };

    let rate = profile.device.tracking_rate_hz;
    let total = spans.last().map(|s| s.end).unwrap_or(0.0);
    let n = (total * rate).floor() as usize + 1;
    let mut time_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let times = jittered_times(n, rate, 0.0, noise.timing_jitter_sigma_s, &mut time_rng);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));

    let mut frames = Vec::with_capacity(n);
    let mut k = 0;
    for (i, &t) in times.iter().enumerate() {
        // Segment from the nominal tick so jitter never moves a frame
        // across a segment boundary.
        let nominal = i as f64 / rate;
        while k + 1 < spans.len() && nominal >= spans[k].end {
            k += 1;
        }
        let (h, l, r) = render_frame(&rig, &spans[k], nominal, presses);
        frames.push(TelemetryFrame {
            t,
            hmd: perturb(h, &mut rng, noise),
            left: perturb(l, &mut rng, noise),
            right: perturb(r, &mut rng, noise),
        });
    }
    TelemetryTrace::new(frames, Some(rate)).expect("rendered trace is valid")
}

fn device_api(profile: &UserProfile, traits: &UserTraits, noise: &NoiseModel, seed: u64) -> DeviceApiSample {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    let refresh = profile.device.hmd_refresh_hz;
    let n = (RENDER_CAPTURE_S * refresh).round() as usize;
    let render_timestamps = jittered_times(n, refresh, RENDER_CAPTURE_START_S, noise.timing_jitter_sigma_s, &mut rng);
    let ipd_m = round_to_fraction(profile.ipd_m + traits.ipd_report_error_m, 10_000.0).clamp(IPD_RANGE_M.0, IPD_RANGE_M.1);
    DeviceApiSample {
        ipd_m,
        render_timestamps,
        reported_resolution_mp: profile.device.resolution_mp,
        reported_fov_deg: profile.device.fov_deg,
        host: Some(profile.host),
    }
}

//! Runs every attack an attacker tier is able to run and collects the
//! results into an [`AttributeReport`].

use crate::anthro::{self, LongerArm};
use crate::behavior::{self, MocaKey, PanelLayout};
use crate::device::{self, DeviceFeatures};
use crate::env::{self, PropagationModel, ServerSite};
use crate::inference::{self, FittedModel, Prediction};
use crate::model::{
    puzzle_spans, AttackerTier, AttributeEntry, AttributeReport, ObservableClass, ReportValue, SessionBundle,
};
use crate::sim::{DeviceSpec, DeviceTable, ScenarioScript};
use serde::{Deserialize, Serialize};
use std::fmt::Display;

pub mod keys {
    pub const HEIGHT: &str = "height";
    pub const WINGSPAN: &str = "wingspan";
    pub const LONGER_ARM: &str = "longer_arm";
    pub const HANDEDNESS: &str = "handedness";
    pub const IPD: &str = "ipd";
    pub const FITNESS: &str = "fitness";
    pub const REACTION_TIME: &str = "reaction_time";
    pub const ROOM_LENGTH: &str = "room_length";
    pub const ROOM_WIDTH: &str = "room_width";
    pub const ROOM_AREA: &str = "room_area";
    pub const GEO_LAT: &str = "geo_lat";
    pub const GEO_LON: &str = "geo_lon";
    pub const GEO_RESIDUAL: &str = "geo_residual";
    pub const TRACKING_RATE: &str = "tracking_rate";
    pub const REFRESH_RATE: &str = "refresh_rate";
    pub const REFRESH_BAND: &str = "refresh_band";
    pub const DEVICE_MODEL: &str = "device_model";
    pub const HOST_TIER: &str = "host_tier";
    pub const MOCA_TOTAL: &str = "moca_total";
    pub const MOCA_PASS: &str = "moca_pass";
    pub const COLORBLIND: &str = "colorblind";
    pub const LANGUAGES: &str = "languages";
    pub const HYPEROPIA: &str = "hyperopia";
    pub const MYOPIA: &str = "myopia";
    pub const GENDER: &str = "gender";
    pub const AGE: &str = "age";
    pub const ETHNICITY: &str = "ethnicity";
    pub const DISABILITY: &str = "disability";
    pub const IDENTITY_MATCH: &str = "identity_match";
}

/// Attack id, the class of observable it reads, and the report keys it fills.
pub const ATTACKS: [(&str, ObservableClass, &[&str]); 20] = [
    ("height", ObservableClass::Behavior, &[keys::HEIGHT]),
    ("wingspan", ObservableClass::Behavior, &[keys::WINGSPAN]),
    ("longer_arm", ObservableClass::Behavior, &[keys::LONGER_ARM]),
    ("handedness", ObservableClass::Behavior, &[keys::HANDEDNESS]),
    ("fitness", ObservableClass::Behavior, &[keys::FITNESS]),
    ("reaction_time", ObservableClass::Behavior, &[keys::REACTION_TIME]),
    ("ipd", ObservableClass::Device, &[keys::IPD]),
    ("room", ObservableClass::Geospatial, &[keys::ROOM_LENGTH, keys::ROOM_WIDTH, keys::ROOM_AREA]),
    ("geolocation", ObservableClass::Network, &[keys::GEO_LAT, keys::GEO_LON, keys::GEO_RESIDUAL]),
    ("tracking_rate", ObservableClass::Device, &[keys::TRACKING_RATE]),
    ("refresh_rate", ObservableClass::Device, &[keys::REFRESH_RATE]),
    ("refresh_band", ObservableClass::Behavior, &[keys::REFRESH_BAND]),
    ("device_model", ObservableClass::Device, &[keys::DEVICE_MODEL]),
    ("host_tier", ObservableClass::Device, &[keys::HOST_TIER]),
    ("moca", ObservableClass::Audio, &[keys::MOCA_TOTAL, keys::MOCA_PASS]),
    ("colorblind", ObservableClass::Audio, &[keys::COLORBLIND]),
    ("languages", ObservableClass::Audio, &[keys::LANGUAGES]),
    ("eyesight", ObservableClass::Behavior, &[keys::HYPEROPIA, keys::MYOPIA]),
    ("demographics", ObservableClass::Behavior, &[keys::GENDER, keys::AGE, keys::ETHNICITY, keys::DISABILITY]),
    ("identity", ObservableClass::Behavior, &[keys::IDENTITY_MATCH]),
];

fn attack_class(id: &str) -> ObservableClass {
    ATTACKS.iter().find(|a| a.0 == id).map(|a| a.1).expect("registered attack")
}

/// Report keys the tier may ever hold.
pub fn permitted_keys(tier: AttackerTier) -> Vec<&'static str> {
    ATTACKS.iter().filter(|a| tier.can_observe(a.1)).flat_map(|a| a.2.iter().copied()).collect()
}

/// Optional fitted models for the derived attributes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceModels {
    #[serde(default)]
    pub gender: Option<FittedModel>,
    #[serde(default)]
    pub age: Option<FittedModel>,
    #[serde(default)]
    pub ethnicity: Option<FittedModel>,
    #[serde(default)]
    pub disability: Option<FittedModel>,
    #[serde(default)]
    pub identity: Option<FittedModel>,
}

impl InferenceModels {
    fn is_empty(&self) -> bool {
        self.gender.is_none()
            && self.age.is_none()
            && self.ethnicity.is_none()
            && self.disability.is_none()
            && self.identity.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub servers: Vec<ServerSite>,
    pub propagation: PropagationModel,
    pub layout: PanelLayout,
    pub devices: Vec<DeviceSpec>,
    pub moca_key: MocaKey,
    /// Puzzles during which the player just stands; their spans feed the
    /// height estimate.
    pub stand_puzzles: Vec<u8>,
    pub models: InferenceModels,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            servers: env::default_servers(),
            propagation: PropagationModel::default(),
            layout: PanelLayout::shipped(),
            devices: DeviceTable::shipped().devices,
            moca_key: MocaKey::default(),
            stand_puzzles: ScenarioScript::default_script().stand_puzzles(),
            models: InferenceModels::default(),
        }
    }
}

const CONF_HIGH: f64 = 0.95;
const CONF_MID: f64 = 0.8;
const CONF_LOW: f64 = 0.6;

struct Run<'a> {
    report: AttributeReport,
    tier: AttackerTier,
    cfg: &'a AttackConfig,
    denied: Vec<String>,
}

impl Run<'_> {
    fn allowed(&mut self, id: &str) -> bool {
        let class = attack_class(id);
        if self.tier.can_observe(class) {
            return true;
        }
        self.report.record_failure(id, format!("CapabilityDenied: {} cannot observe {:?}", self.tier, class));
        self.denied.push(id.to_string());
        false
    }

    fn put(&mut self, key: &str, value: ReportValue, unit: &str, conf: f64, source: &str) {
        self.report.insert(key, AttributeEntry::new(value, unit, conf, source)).expect("each key written once");
    }

    fn fail(&mut self, id: &str, e: impl Display) {
        self.report.record_failure(id, e);
    }
}

/// Outcome of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub report: AttributeReport,
    /// Attacks skipped because the tier cannot observe their inputs.
    pub denied: Vec<String>,
}

/// Runs all attacks on `bundle` as seen by its attacker tier. Inputs the
/// tier cannot observe are masked before any extractor runs.
pub fn run_attacks(bundle: &SessionBundle, session_id: &str, cfg: &AttackConfig) -> AttackOutcome {
    let tier = bundle.attacker_tier();
    let view = bundle.masked_for(tier);
    let trace = view.trace();
    let events = view.events();
    let mut run = Run { report: AttributeReport::new(session_id, tier), tier, cfg, denied: Vec::new() };

    let spans = puzzle_spans(events, trace.end());
    let stand: Vec<(f64, f64)> = run.cfg.stand_puzzles.iter().filter_map(|p| spans.get(p).copied()).collect();

    let mut height = None;
    if run.allowed("height") {
        match anthro::estimate_height(trace, &stand) {
            Ok(h) => {
                height = Some(h);
                run.put(keys::HEIGHT, ReportValue::Number(h), "m", CONF_MID, "height");
            }
            Err(e) => run.fail("height", e),
        }
    }
    if run.allowed("wingspan") {
        match anthro::estimate_wingspan(trace, events) {
            Ok(w) => run.put(keys::WINGSPAN, ReportValue::Number(w), "m", CONF_MID, "wingspan"),
            Err(e) => run.fail("wingspan", e),
        }
    }
    if run.allowed("longer_arm") {
        match anthro::compare_arm_lengths(trace, events) {
            Ok(a) => {
                let conf = if a == LongerArm::Undetermined { CONF_LOW } else { CONF_MID };
                run.put(keys::LONGER_ARM, ReportValue::Text(a.name().into()), "", conf, "longer_arm");
            }
            Err(e) => run.fail("longer_arm", e),
        }
    }
    if run.allowed("handedness") {
        match anthro::estimate_handedness(events, trace) {
            Ok(h) => run.put(keys::HANDEDNESS, ReportValue::Text(h.name().into()), "", CONF_HIGH, "handedness"),
            Err(e) => run.fail("handedness", e),
        }
    }
    if run.allowed("fitness") {
        match height.ok_or("needs a height estimate").map(|h| anthro::estimate_fitness(trace, events, h)) {
            Ok(Ok(f)) => {
                let v = if f.low { "low" } else { "not_low" };
                run.put(keys::FITNESS, ReportValue::Text(v.into()), "", CONF_MID, "fitness");
            }
            Ok(Err(e)) => run.fail("fitness", e),
            Err(e) => run.fail("fitness", e),
        }
    }
    if run.allowed("reaction_time") {
        match anthro::estimate_reaction_time(events) {
            Ok(r) => run.put(keys::REACTION_TIME, ReportValue::Number(r.seconds), "s", CONF_MID, "reaction_time"),
            Err(e) => run.fail("reaction_time", e),
        }
    }
    if run.allowed("ipd") {
        match anthro::estimate_ipd(view.device_api()) {
            Ok(v) => run.put(keys::IPD, ReportValue::Number(v), "m", CONF_HIGH, "ipd"),
            Err(e) => run.fail("ipd", e),
        }
    }
    if run.allowed("room") {
        if trace.len() < 2 {
            run.fail("room", "need at least 2 frames");
        } else {
            let r = env::estimate_room_dims(trace);
            run.put(keys::ROOM_LENGTH, ReportValue::Number(r.length_m), "m", CONF_MID, "room");
            run.put(keys::ROOM_WIDTH, ReportValue::Number(r.width_m), "m", CONF_MID, "room");
            run.put(keys::ROOM_AREA, ReportValue::Number(r.area_m2), "m2", CONF_MID, "room");
        }
    }
    if run.allowed("geolocation") {
        match env::geolocate(view.latency(), &run.cfg.servers, &run.cfg.propagation) {
            Ok(g) => {
                let conf = if g.converged { CONF_MID } else { CONF_LOW };
                run.put(keys::GEO_LAT, ReportValue::Number(g.lat_deg), "deg", conf, "geolocation");
                run.put(keys::GEO_LON, ReportValue::Number(g.lon_deg), "deg", conf, "geolocation");
                run.put(keys::GEO_RESIDUAL, ReportValue::Number(g.residual_m), "m", conf, "geolocation");
                if !g.converged {
                    run.fail("geolocation", "NoConvergence: refinement did not converge, grid best reported");
                }
            }
            Err(e) => run.fail("geolocation", e),
        }
    }
    let mut tracking = None;
    if run.allowed("tracking_rate") {
        match device::estimate_tracking_rate(trace) {
            Ok(r) => {
                tracking = Some(r);
                run.put(keys::TRACKING_RATE, ReportValue::Number(r), "Hz", CONF_HIGH, "tracking_rate");
            }
            Err(e) => run.fail("tracking_rate", e),
        }
    }
    let mut refresh = None;
    if run.allowed("refresh_rate") {
        match device::estimate_refresh_rate(view.device_api()) {
            Ok(r) => {
                refresh = Some(r);
                run.put(keys::REFRESH_RATE, ReportValue::Number(r), "Hz", CONF_HIGH, "refresh_rate");
            }
            Err(e) => run.fail("refresh_rate", e),
        }
    }
    if run.allowed("refresh_band") {
        match device::estimate_refresh_band(events) {
            Ok(b) => run.put(keys::REFRESH_BAND, ReportValue::Band { lo: b.lo, hi: b.hi }, "Hz", CONF_MID, "refresh_band"),
            Err(e) => run.fail("refresh_band", e),
        }
    }
    if run.allowed("device_model") {
        match tracking {
            Some(t) => {
                let api = view.device_api();
                let f = DeviceFeatures {
                    tracking_hz: t,
                    refresh_hz: refresh,
                    resolution_mp: api.map(|a| a.reported_resolution_mp),
                    fov_deg: api.map(|a| a.reported_fov_deg),
                };
                match device::classify_device(&f, &run.cfg.devices) {
                    Ok(m) => run.put(keys::DEVICE_MODEL, ReportValue::Text(m.into()), "", CONF_HIGH, "device_model"),
                    Err(e) => run.fail("device_model", e),
                }
            }
            None => run.fail("device_model", "needs a tracking rate"),
        }
    }
    if run.allowed("host_tier") {
        match view.device_api().and_then(|a| a.host) {
            Some(h) => {
                let t = device::host_tier(h.cpu_ghz, h.gpu_mhs);
                run.put(keys::HOST_TIER, ReportValue::Text(t.name().into()), "", CONF_MID, "host_tier");
            }
            None => run.fail("host_tier", "no host benchmark in the device API sample"),
        }
    }
    if run.allowed("moca") {
        match behavior::score_moca(events, &run.cfg.moca_key) {
            Ok(s) => {
                run.put(keys::MOCA_TOTAL, ReportValue::Number(s.total as f64), "points", CONF_MID, "moca");
                run.put(keys::MOCA_PASS, ReportValue::Bool(s.pass), "", CONF_MID, "moca");
            }
            Err(e) => run.fail("moca", e),
        }
    }
    if run.allowed("colorblind") {
        match behavior::detect_colorblind(events) {
            Ok(b) => run.put(keys::COLORBLIND, ReportValue::Bool(b), "", CONF_HIGH, "colorblind"),
            Err(e) => run.fail("colorblind", e),
        }
    }
    if run.allowed("languages") {
        match behavior::detect_languages(trace, events, &run.cfg.layout) {
            Ok(set) => run.put(keys::LANGUAGES, ReportValue::Set(set.into_iter().collect()), "", CONF_MID, "languages"),
            // Looking at no panel while greeting means no second language.
            Err(behavior::BehaviorError::NoGazeHit) => {
                run.put(keys::LANGUAGES, ReportValue::Set(Vec::new()), "", CONF_LOW, "languages")
            }
            Err(e) => run.fail("languages", e),
        }
    }
    if run.allowed("eyesight") {
        match behavior::assess_eyesight(events) {
            Ok(s) => {
                run.put(keys::HYPEROPIA, ReportValue::Bool(s.hyperopia), "", CONF_MID, "eyesight");
                run.put(keys::MYOPIA, ReportValue::Bool(s.myopia), "", CONF_MID, "eyesight");
            }
            Err(e) => run.fail("eyesight", e),
        }
    }

    if !run.cfg.models.is_empty() {
        let fv = inference::assemble_features(&run.report, Some(trace.duration()));
        let models = &run.cfg.models;
        let derived = [
            (keys::GENDER, &models.gender, ""),
            (keys::AGE, &models.age, "years"),
            (keys::ETHNICITY, &models.ethnicity, ""),
            (keys::DISABILITY, &models.disability, ""),
        ];
        let mut results = Vec::new();
        for (key, model, unit) in derived {
            if let Some(m) = model {
                results.push((key, unit, inference::infer(m, &fv)));
            }
        }
        let identity = models.identity.as_ref().map(|idx| inference::identify_user(idx, &fv));
        for (key, unit, r) in results {
            match r {
                Ok(Prediction::Class { label, confidence }) => {
                    run.put(key, ReportValue::Text(label), unit, confidence, "demographics")
                }
                Ok(Prediction::Number { value }) => run.put(key, ReportValue::Number(value), unit, CONF_LOW, "demographics"),
                Err(e) => run.fail(&format!("demographics.{key}"), e),
            }
        }
        match identity {
            Some(Ok((user, dist))) => {
                let conf = 1.0 / (1.0 + dist);
                run.put(keys::IDENTITY_MATCH, ReportValue::Text(user), "", conf, "identity");
            }
            Some(Err(e)) => run.fail("identity", e),
            None => {}
        }
    }

    AttackOutcome { report: run.report, denied: run.denied }
}

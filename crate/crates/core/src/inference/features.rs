use crate::model::AttributeReport;
use crate::pipeline::keys;
use serde::{Deserialize, Serialize};

pub const FEATURE_VERSION: u32 = 1;
pub const LANGUAGES: [&str; 8] = ["hi", "zh", "fr", "ja", "ru", "es", "pt", "ar"];
pub const FEATURE_NAMES: [&str; 17] = [
    "height_m",
    "wingspan_m",
    "ipd_m",
    "reaction_time_s",
    "close_vision",
    "far_vision",
    "moca_total",
    "fitness_low",
    "session_duration_s",
    "lang_hi",
    "lang_zh",
    "lang_fr",
    "lang_ja",
    "lang_ru",
    "lang_es",
    "lang_pt",
    "lang_ar",
];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

/// Fixed-order features; `None` marks an attribute the attack did not
/// recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub version: u32,
    pub values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn empty() -> Self {
        FeatureVector { version: FEATURE_VERSION, values: vec![None; FEATURE_NAMES.len()] }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).and_then(|i| self.values.get(i).copied().flatten())
    }

    pub fn set(&mut self, name: &str, v: f64) {
        if let Some(i) = feature_index(name) {
            self.values[i] = Some(v);
        }
    }

    pub fn filled(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Vision features are 1 for good vision, i.e. the read succeeded.
pub fn assemble_features(report: &AttributeReport, duration_s: Option<f64>) -> FeatureVector {
    let mut fv = FeatureVector::empty();
    let num = |k: &str| report.number(k);
    let boolean = |k: &str| report.value(k).and_then(|v| v.as_bool());
    for (name, key) in [
        ("height_m", keys::HEIGHT),
        ("wingspan_m", keys::WINGSPAN),
        ("ipd_m", keys::IPD),
        ("reaction_time_s", keys::REACTION_TIME),
        ("moca_total", keys::MOCA_TOTAL),
    ] {
        if let Some(v) = num(key) {
            fv.set(name, v);
        }
    }
    if let Some(b) = boolean(keys::HYPEROPIA) {
        fv.set("close_vision", flag(!b));
    }
    if let Some(b) = boolean(keys::MYOPIA) {
        fv.set("far_vision", flag(!b));
    }
    if let Some(f) = report.value(keys::FITNESS).and_then(|v| v.as_text()) {
        fv.set("fitness_low", flag(f == "low"));
    }
    if let Some(d) = duration_s {
        fv.set("session_duration_s", d);
    }
    if let Some(spoken) = report.value(keys::LANGUAGES).and_then(|v| v.as_set()) {
        for l in LANGUAGES {
            fv.set(&format!("lang_{l}"), flag(spoken.iter().any(|s| s == l)));
        }
    }
    fv
}

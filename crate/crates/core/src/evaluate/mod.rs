//! Scores reports against ground-truth profiles.

use crate::env::{great_circle_m, GeoPoint};
use crate::model::AttributeReport;
use crate::pipeline::keys;
use crate::sim::{Fitness, Severity, UserProfile};
use crate::stats::{f1_score, r_squared};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("reports without a profile: {0:?}")]
    UnknownSessions(Vec<String>),
    #[error("profiles without a report: {0:?}")]
    MissingReports(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub attribute: String,
    /// `within`, `accuracy`, `r2` or `f1`.
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub unit: String,
    pub value: f64,
    /// Sessions that contributed.
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub sessions: usize,
    pub rows: Vec<AccuracyRow>,
}

impl AccuracyTable {
    pub fn row(&self, attribute: &str, metric: &str, tolerance: Option<f64>) -> Option<&AccuracyRow> {
        self.rows.iter().find(|r| r.attribute == attribute && r.metric == metric && r.tolerance == tolerance)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Attribute | Metric | Value | n |\n|---|---|---|---|\n");
        for r in &self.rows {
            let metric = match (r.metric.as_str(), r.tolerance) {
                ("within", Some(t)) => format!("within {t} {}", r.unit),
                (m, _) => m.to_string(),
            };
            let metric = match &r.subset {
                Some(sub) => format!("{metric} ({sub})"),
                None => metric,
            };
            let value = if r.metric == "r2" { format!("{:.3}", r.value) } else { format!("{:.1}%", 100.0 * r.value) };
            writeln!(s, "| {} | {} | {} | {} |", r.attribute, metric, value, r.n).expect("write to string");
        }
        s
    }
}

struct Rows {
    rows: Vec<AccuracyRow>,
}

impl Rows {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, attribute: &str, metric: &str, tolerance: Option<f64>, unit: &str, value: f64, n: usize, subset: Option<&str>) {
        if n > 0 {
            self.rows.push(AccuracyRow {
                attribute: attribute.into(),
                metric: metric.into(),
                tolerance,
                unit: unit.into(),
                value,
                n,
                subset: subset.map(String::from),
            });
        }
    }

    fn within(&mut self, attribute: &str, pairs: &[(f64, f64)], tols: &[f64], unit: &str, subset: Option<&str>) {
        for &t in tols {
            let ok = pairs.iter().filter(|(a, b)| (a - b).abs() <= t + 1e-9).count();
            self.push(attribute, "within", Some(t), unit, frac(ok, pairs.len()), pairs.len(), subset);
        }
    }

    fn r2(&mut self, attribute: &str, pairs: &[(f64, f64)]) {
        let (a, p): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        if let Some(v) = r_squared(&a, &p) {
            self.push(attribute, "r2", None, "", v, pairs.len(), None);
        }
    }

    fn accuracy(&mut self, attribute: &str, hits: &[bool], subset: Option<&str>) {
        let ok = hits.iter().filter(|h| **h).count();
        self.push(attribute, "accuracy", None, "", frac(ok, hits.len()), hits.len(), subset);
    }

    fn binary(&mut self, attribute: &str, pairs: &[(bool, bool)]) {
        let hits: Vec<bool> = pairs.iter().map(|(a, b)| a == b).collect();
        self.accuracy(attribute, &hits, None);
        let (a, p): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
        if let Some(f) = f1_score(&a, &p) {
            self.push(attribute, "f1", None, "", f, pairs.len(), None);
        }
    }
}

fn frac(ok: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        ok as f64 / n as f64
    }
}

/// Pairs each report with the profile whose user id equals its session id.
/// The result does not depend on input order.
pub fn evaluate(profiles: &[UserProfile], reports: &[AttributeReport]) -> Result<AccuracyTable, EvalError> {
    let by_id: BTreeMap<&str, &UserProfile> = profiles.iter().map(|p| (p.user_id.as_str(), p)).collect();
    let mut reps: Vec<&AttributeReport> = reports.iter().collect();
    reps.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    let unknown: Vec<String> =
        reps.iter().filter(|r| !by_id.contains_key(r.session_id.as_str())).map(|r| r.session_id.clone()).collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownSessions(unknown));
    }
    let covered: std::collections::BTreeSet<&str> = reps.iter().map(|r| r.session_id.as_str()).collect();
    let missing: Vec<String> = by_id.keys().filter(|k| !covered.contains(*k)).map(|k| k.to_string()).collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingReports(missing));
    }
    let pairs: Vec<(&UserProfile, &AttributeReport)> = reps.iter().map(|r| (by_id[r.session_id.as_str()], *r)).collect();

    let num = |key: &str| -> Vec<(&UserProfile, f64)> {
        pairs.iter().filter_map(|(p, r)| r.number(key).map(|v| (*p, v))).collect()
    };
    let text = |key: &str| -> Vec<(&UserProfile, String)> {
        pairs.iter().filter_map(|(p, r)| r.value(key).and_then(|v| v.as_text()).map(|v| (*p, v.to_string()))).collect()
    };
    let boolean = |key: &str| -> Vec<(&UserProfile, bool)> {
        pairs.iter().filter_map(|(p, r)| r.value(key).and_then(|v| v.as_bool()).map(|v| (*p, v))).collect()
    };

    let mut t = Rows { rows: Vec::new() };

    let h: Vec<(f64, f64)> = num(keys::HEIGHT).into_iter().map(|(p, v)| (p.height_m, v)).collect();
    t.within("height", &h, &[0.05, 0.07], "m", None);
    t.r2("height", &h);

    let w: Vec<(f64, f64)> = num(keys::WINGSPAN).into_iter().map(|(p, v)| (p.wingspan_m, v)).collect();
    t.within("wingspan", &w, &[0.07], "m", None);
    t.r2("wingspan", &w);

    let arms: Vec<bool> = text(keys::LONGER_ARM)
        .into_iter()
        .filter(|(p, _)| (p.arm_left_m - p.arm_right_m).abs() >= 0.03 - 1e-9)
        .map(|(p, v)| v == if p.arm_left_m > p.arm_right_m { "left_longer" } else { "right_longer" })
        .collect();
    t.accuracy("longer_arm", &arms, Some("|difference| >= 3 cm"));

    let hand: Vec<bool> = text(keys::HANDEDNESS).into_iter().map(|(p, v)| v == p.handedness.name()).collect();
    t.accuracy("handedness", &hand, None);

    let ipd = num(keys::IPD);
    let all: Vec<(f64, f64)> = ipd.iter().map(|(p, v)| (p.ipd_m, *v)).collect();
    t.within("ipd", &all, &[0.0005], "m", None);
    let vp2: Vec<(f64, f64)> =
        ipd.iter().filter(|(p, _)| p.device.model == "HTC Vive Pro 2").map(|(p, v)| (p.ipd_m, *v)).collect();
    t.within("ipd", &vp2, &[0.0005], "m", Some("HTC Vive Pro 2"));

    let fit: Vec<(bool, bool)> = text(keys::FITNESS).into_iter().map(|(p, v)| (p.fitness == Fitness::Low, v == "low")).collect();
    t.binary("fitness_low", &fit);

    let rt = num(keys::REACTION_TIME);
    let rt_class: Vec<bool> = rt.iter().map(|(p, v)| p.is_fast_reactor() == (*v < 0.25)).collect();
    t.accuracy("reaction_class", &rt_class, None);
    let rt_pairs: Vec<(f64, f64)> = rt.iter().map(|(p, v)| (p.reaction_time_s, *v)).collect();
    t.within("reaction_time", &rt_pairs, &[1.0 / 60.0], "s", None);

    let area: Vec<(f64, f64)> =
        num(keys::ROOM_AREA).into_iter().map(|(p, v)| (p.room_length_m * p.room_width_m, v)).collect();
    t.within("room_area", &area, &[2.0, 3.0], "m2", None);

    let geo: Vec<(f64, f64)> = pairs
        .iter()
        .filter_map(|(p, r)| {
            let (lat, lon) = (r.number(keys::GEO_LAT)?, r.number(keys::GEO_LON)?);
            Some((0.0, great_circle_m(p.location, GeoPoint::new(lat, lon)) / 1000.0))
        })
        .collect();
    t.within("geolocation", &geo, &[500.0], "km", None);

    let tr: Vec<(f64, f64)> =
        num(keys::TRACKING_RATE).into_iter().map(|(p, v)| (p.device.tracking_rate_hz, v)).collect();
    t.within("tracking_rate", &tr, &[2.5], "Hz", None);
    let rr: Vec<(f64, f64)> = num(keys::REFRESH_RATE).into_iter().map(|(p, v)| (p.device.hmd_refresh_hz, v)).collect();
    t.within("refresh_rate", &rr, &[3.0], "Hz", None);
    let band: Vec<bool> = pairs
        .iter()
        .filter_map(|(p, r)| match r.value(keys::REFRESH_BAND)? {
            crate::model::ReportValue::Band { lo, hi } => {
                let f = p.device.hmd_refresh_hz;
                Some(f >= *lo && hi.is_none_or(|h| f < h))
            }
            _ => None,
        })
        .collect();
    t.accuracy("refresh_band", &band, None);

    let dev: Vec<bool> = text(keys::DEVICE_MODEL).into_iter().map(|(p, v)| v == p.device.model).collect();
    t.accuracy("device_model", &dev, None);

    let moca: Vec<(bool, bool)> = boolean(keys::MOCA_PASS).into_iter().map(|(p, v)| (p.moca_answers.pass(), v)).collect();
    t.binary("moca_pass", &moca);
    let moca_total: Vec<(f64, f64)> =
        num(keys::MOCA_TOTAL).into_iter().map(|(p, v)| (p.moca_answers.total() as f64, v)).collect();
    t.within("moca_total", &moca_total, &[0.0], "points", None);

    let cb: Vec<(bool, bool)> = boolean(keys::COLORBLIND).into_iter().map(|(p, v)| (p.colorblind, v)).collect();
    t.binary("colorblind", &cb);

    let langs: Vec<bool> = pairs
        .iter()
        .filter_map(|(p, r)| {
            let target = p.gaze_language.as_ref()?;
            let got = r.value(keys::LANGUAGES)?.as_set()?;
            Some(got.contains(target))
        })
        .collect();
    t.accuracy("languages", &langs, Some("multilingual"));

    let myo: Vec<(bool, bool)> = boolean(keys::MYOPIA).into_iter().map(|(p, v)| (p.myopia != Severity::None, v)).collect();
    t.binary("myopia", &myo);
    let hyp: Vec<(bool, bool)> =
        boolean(keys::HYPEROPIA).into_iter().map(|(p, v)| (p.hyperopia != Severity::None, v)).collect();
    t.binary("hyperopia", &hyp);

    let gender: Vec<bool> = text(keys::GENDER).into_iter().map(|(p, v)| v == p.gender.name()).collect();
    t.accuracy("gender", &gender, None);
    let eth: Vec<bool> = text(keys::ETHNICITY).into_iter().map(|(p, v)| v == p.ethnicity.name()).collect();
    t.accuracy("ethnicity", &eth, None);
    let dis: Vec<bool> = text(keys::DISABILITY).into_iter().map(|(p, v)| v == p.disability.name()).collect();
    t.accuracy("disability", &dis, None);
    let age: Vec<(f64, f64)> = num(keys::AGE).into_iter().map(|(p, v)| (p.age_years as f64, v)).collect();
    t.within("age", &age, &[1.5], "years", None);
    let id: Vec<bool> = text(keys::IDENTITY_MATCH).into_iter().map(|(p, v)| v == p.user_id).collect();
    t.accuracy("identity", &id, None);

    Ok(AccuracyTable { sessions: pairs.len(), rows: t.rows })
}

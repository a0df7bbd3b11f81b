//! Recovered attributes for one session, with provenance.

use super::{AttackerTier, ModelError};
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportValue {
    Bool(bool),
    Number(f64),
    Text(String),
    Set(Vec<String>),
    /// Half-open interval; `hi = None` means unbounded.
    Band { lo: f64, hi: Option<f64> },
}

impl ReportValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ReportValue::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ReportValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ReportValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&[String]> {
        match self {
            ReportValue::Set(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEntry {
    pub value: ReportValue,
    pub unit: String,
    pub confidence: f64,
    pub source: String,
}

impl AttributeEntry {
    pub fn new(value: ReportValue, unit: &str, confidence: f64, source: &str) -> Self {
        AttributeEntry { value, unit: unit.to_string(), confidence, source: source.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub session_id: String,
    pub tier: AttackerTier,
    #[serde(deserialize_with = "unique_attributes")]
    attributes: BTreeMap<String, AttributeEntry>,
    /// Attack id → reason it produced nothing.
    #[serde(default)]
    pub failures: BTreeMap<String, String>,
}

impl AttributeReport {
    pub fn new(session_id: impl Into<String>, tier: AttackerTier) -> Self {
        AttributeReport { session_id: session_id.into(), tier, attributes: BTreeMap::new(), failures: BTreeMap::new() }
    }

    pub fn insert(&mut self, key: &str, entry: AttributeEntry) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&entry.confidence) {
            return Err(ModelError::InvalidConfidence(entry.confidence));
        }
        if self.attributes.contains_key(key) {
            return Err(ModelError::DuplicateAttribute(key.to_string()));
        }
        self.attributes.insert(key.to_string(), entry);
        Ok(())
    }

    pub fn record_failure(&mut self, attack_id: &str, reason: impl fmt::Display) {
        self.failures.insert(attack_id.to_string(), reason.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&AttributeEntry> {
        self.attributes.get(key)
    }

    pub fn value(&self, key: &str) -> Option<&ReportValue> {
        self.attributes.get(key).map(|e| &e.value)
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.value(key).and_then(ReportValue::as_f64)
    }

    pub fn attributes(&self) -> &BTreeMap<String, AttributeEntry> {
        &self.attributes
    }

    pub fn remove(&mut self, key: &str) -> Option<AttributeEntry> {
        self.attributes.remove(key)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn unique_attributes<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, AttributeEntry>, D::Error> {
    struct V;
    impl<'de> Visitor<'de> for V {
        type Value = BTreeMap<String, AttributeEntry>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map of attribute entries")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((k, v)) = m.next_entry::<String, AttributeEntry>()? {
                if !(0.0..=1.0).contains(&v.confidence) {
                    return Err(de::Error::custom(format!("attribute {k}: confidence {} outside [0, 1]", v.confidence)));
                }
                if out.insert(k.clone(), v).is_some() {
                    return Err(de::Error::custom(format!("attribute {k} appears twice")));
                }
            }
            Ok(out)
        }
    }
    d.deserialize_map(V)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_bad_confidence() {
        let mut r = AttributeReport::new("u0", AttackerTier::PrivilegedII);
        r.insert("height", AttributeEntry::new(ReportValue::Number(1.7), "m", 1.0, "anthro.height")).unwrap();
        let dup = r.insert("height", AttributeEntry::new(ReportValue::Number(1.8), "m", 1.0, "x"));
        assert_eq!(dup, Err(ModelError::DuplicateAttribute("height".into())));
        let bad = r.insert("ipd", AttributeEntry::new(ReportValue::Number(0.06), "m", 1.5, "x"));
        assert_eq!(bad, Err(ModelError::InvalidConfidence(1.5)));
    }

    #[test]
    fn json_round_trip_and_duplicate_key_rejection() {
        let mut r = AttributeReport::new("u1", AttackerTier::NonPrivileged);
        r.insert("colorblind", AttributeEntry::new(ReportValue::Bool(false), "", 1.0, "behavior.colorblind")).unwrap();
        r.insert("languages", AttributeEntry::new(ReportValue::Set(vec!["es".into()]), "", 1.0, "behavior.languages")).unwrap();
        r.insert("refresh_band", AttributeEntry::new(ReportValue::Band { lo: 90.0, hi: Some(120.0) }, "Hz", 1.0, "device.ufo")).unwrap();
        r.insert("handedness", AttributeEntry::new(ReportValue::Text("right".into()), "", 1.0, "anthro.handedness")).unwrap();
        r.record_failure("anthro.ipd", "capability denied");
        let text = r.to_json_pretty();
        let back: AttributeReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);

        let dup = r#"{"session_id":"u","tier":"PrivilegedI","attributes":{
            "a":{"value":1,"unit":"","confidence":1,"source":"s"},
            "a":{"value":2,"unit":"","confidence":1,"source":"s"}}}"#;
        assert!(serde_json::from_str::<AttributeReport>(dup).is_err());
    }
}

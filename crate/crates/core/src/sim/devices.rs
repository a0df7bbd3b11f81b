use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub model: String,
    pub hmd_refresh_hz: f64,
    pub tracking_rate_hz: f64,
    pub resolution_mp: f64,
    pub fov_deg: f64,
    /// Whether the model was part of the original user study.
    #[serde(default)]
    pub validated: bool,
}

impl DeviceSpec {
    pub fn is_valid(&self) -> bool {
        [self.hmd_refresh_hz, self.tracking_rate_hz, self.resolution_mp, self.fov_deg]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTable {
    pub version: u32,
    pub devices: Vec<DeviceSpec>,
}

impl DeviceTable {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let table: DeviceTable = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut names = BTreeSet::new();
        for d in &table.devices {
            if !d.is_valid() {
                return Err(format!("device {:?} has a non-positive field", d.model));
            }
            if !names.insert(d.model.as_str()) {
                return Err(format!("device {:?} listed twice", d.model));
            }
        }
        Ok(table)
    }

    pub fn shipped() -> Self {
        Self::from_json(include_str!("../../data/devices.json")).expect("shipped devices.json is valid")
    }

    pub fn get(&self, model: &str) -> Option<&DeviceSpec> {
        self.devices.iter().find(|d| d.model == model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_has_study_devices() {
        let t = DeviceTable::shipped();
        for (m, hz) in [("HTC Vive", 90.0), ("HTC Vive Pro 2", 120.0), ("Oculus Quest 2", 72.0), ("Valve Index", 144.0)] {
            assert_eq!(t.get(m).unwrap().tracking_rate_hz, hz);
        }
        assert_eq!(t.devices.iter().filter(|d| d.validated).count(), 3);
    }

    #[test]
    fn rejects_duplicate_models() {
        let d = r#"{"model":"A","hmd_refresh_hz":1,"tracking_rate_hz":1,"resolution_mp":1,"fov_deg":1}"#;
        assert!(DeviceTable::from_json(&format!(r#"{{"version":1,"devices":[{d},{d}]}}"#)).is_err());
    }
}

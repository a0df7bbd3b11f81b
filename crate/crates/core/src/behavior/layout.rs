//! Placement of the language panels on the greeting wall.

use crate::geom::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("layout parse error: {0}")]
    Parse(String),
    #[error("panel {0}: normal is not unit length")]
    BadNormal(String),
    #[error("panel {0}: width and height must be positive")]
    BadSize(String),
    #[error("panels {0} and {1} overlap")]
    Overlap(String, String),
    #[error("duplicate panel language {0}")]
    Duplicate(String),
}

mod as_array {
    use crate::geom::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        v.to_array().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        <[f64; 3]>::deserialize(d).map(Vec3::from_array)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub language: String,
    #[serde(with = "as_array")]
    pub center: Vec3,
    pub width: f64,
    pub height: f64,
    /// Outward normal, towards the player.
    #[serde(with = "as_array")]
    pub normal: Vec3,
}

impl Panel {
    /// In-plane unit axes (right, up) of the panel.
    pub fn axes(&self) -> (Vec3, Vec3) {
        let up = Vec3::new(0.0, 1.0, 0.0);
        let mut right = up.cross(self.normal);
        if right.norm() < 1e-9 {
            // Floor or ceiling panel.
            right = Vec3::new(1.0, 0.0, 0.0);
        }
        let right = right.normalized();
        (right, self.normal.cross(right).normalized())
    }

    /// Distance along the ray to the panel, if the ray hits its front or back.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let denom = dir.dot(self.normal);
        if denom.abs() < 1e-12 {
            return None;
        }
        let s = (self.center - origin).dot(self.normal) / denom;
        if s <= 0.0 {
            return None;
        }
        let local = origin + dir * s - self.center;
        let (right, up) = self.axes();
        let inside = local.dot(right).abs() <= self.width / 2.0 && local.dot(up).abs() <= self.height / 2.0;
        inside.then_some(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelLayout {
    pub panels: Vec<Panel>,
}

impl PanelLayout {
    pub fn from_json(s: &str) -> Result<Self, LayoutError> {
        let layout: PanelLayout = serde_json::from_str(s).map_err(|e| LayoutError::Parse(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn shipped() -> Self {
        Self::from_json(include_str!("../../data/layout.json")).expect("shipped layout is valid")
    }

    pub fn panel(&self, language: &str) -> Option<&Panel> {
        self.panels.iter().find(|p| p.language == language)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        for (i, p) in self.panels.iter().enumerate() {
            if (p.normal.norm() - 1.0).abs() > 1e-9 {
                return Err(LayoutError::BadNormal(p.language.clone()));
            }
            if !(p.width > 0.0 && p.height > 0.0) || !p.center.is_finite() {
                return Err(LayoutError::BadSize(p.language.clone()));
            }
            for q in &self.panels[..i] {
                if q.language == p.language {
                    return Err(LayoutError::Duplicate(p.language.clone()));
                }
                if overlaps(p, q) {
                    return Err(LayoutError::Overlap(q.language.clone(), p.language.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn translated(&self, by: Vec3) -> PanelLayout {
        let panels = self.panels.iter().map(|p| Panel { center: p.center + by, ..p.clone() }).collect();
        PanelLayout { panels }
    }

    /// Nearest panel hit by the ray.
    pub fn hit(&self, origin: Vec3, dir: Vec3) -> Option<&Panel> {
        self.panels
            .iter()
            .filter_map(|p| p.intersect(origin, dir).map(|s| (s, p)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, p)| p)
    }
}

/// Coplanar panels whose rectangles share interior area.
fn overlaps(a: &Panel, b: &Panel) -> bool {
    if (a.normal - b.normal).norm() > 1e-9 || (b.center - a.center).dot(a.normal).abs() > 1e-9 {
        return false;
    }
    let (right, up) = a.axes();
    let d = b.center - a.center;
    d.dot(right).abs() < (a.width + b.width) / 2.0 - 1e-12 && d.dot(up).abs() < (a.height + b.height) / 2.0 - 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_layout_loads() {
        let l = PanelLayout::shipped();
        assert_eq!(l.panels.len(), 8);
        assert!(l.panel("es").is_some());
    }

    #[test]
    fn ray_hits_centre() {
        let l = PanelLayout::shipped();
        let es = l.panel("es").unwrap().center;
        let eye = Vec3::new(0.0, 1.6, 0.0);
        assert_eq!(l.hit(eye, (es - eye).normalized()).unwrap().language, "es");
        assert!(l.hit(eye, Vec3::new(1.0, 0.0, 0.0)).is_none());
        assert!(l.hit(eye, Vec3::new(0.0, 0.0, 1.0)).is_none());
    }

    #[test]
    fn overlap_rejected() {
        let mut l = PanelLayout::shipped();
        l.panels[1].center = l.panels[0].center + Vec3::new(0.1, 0.0, 0.0);
        assert!(matches!(l.validate(), Err(LayoutError::Overlap(..))));
        let mut l = PanelLayout::shipped();
        l.panels[0].normal = Vec3::new(0.0, 0.0, 2.0);
        assert!(matches!(l.validate(), Err(LayoutError::BadNormal(_))));
    }
}

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionPrimitive {
    Stand,
    Turn,
    TPose,
    /// Three squats.
    Squat,
    ButtonPress,
    ExploreRoom,
    ReadNear,
    ReadFar,
    GazePanel,
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub puzzle_id: u8,
    pub duration_s: f64,
    pub primitive: MotionPrimitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub segments: Vec<Segment>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScriptError {
    #[error("script has no segments")]
    EmptyScript,
    #[error("segment {index}: duration must be positive and finite")]
    InvalidDuration { index: usize },
    #[error("segment {index}: puzzle id {id} outside 1..=24")]
    InvalidPuzzle { index: usize, id: u8 },
    #[error("segment {index}: puzzle {id} resumes after another puzzle started")]
    InterleavedPuzzle { index: usize, id: u8 },
    #[error("script: {0}")]
    Parse(String),
}

/// Puzzles whose solution is a spoken password.
pub const PASSWORD_PUZZLES: [u8; 20] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 13, 14, 16, 17, 18, 19, 20, 21, 22];
/// Puzzles carrying the cognitive assessment.
pub const MOCA_PUZZLES: [u8; 7] = [7, 16, 17, 18, 19, 20, 22];

impl ScenarioScript {
    pub fn new(segments: Vec<Segment>) -> Result<Self, ScriptError> {
        let s = ScenarioScript { segments };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let s: ScenarioScript = serde_json::from_str(text).map_err(|e| ScriptError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// The 24-puzzle, 600 s play-through.
    pub fn default_script() -> Self {
        Self::from_json(include_str!("../../data/script.json")).expect("shipped script.json is valid")
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        if self.segments.is_empty() {
            return Err(ScriptError::EmptyScript);
        }
        let mut finished = BTreeSet::new();
        let mut current = None;
        for (index, s) in self.segments.iter().enumerate() {
            if !(s.duration_s.is_finite() && s.duration_s > 0.0) {
                return Err(ScriptError::InvalidDuration { index });
            }
            if !(1..=24).contains(&s.puzzle_id) {
                return Err(ScriptError::InvalidPuzzle { index, id: s.puzzle_id });
            }
            if current != Some(s.puzzle_id) {
                if finished.contains(&s.puzzle_id) {
                    return Err(ScriptError::InterleavedPuzzle { index, id: s.puzzle_id });
                }
                if let Some(c) = current {
                    finished.insert(c);
                }
                current = Some(s.puzzle_id);
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// Puzzles in order of first appearance.
    pub fn puzzles(&self) -> Vec<u8> {
        let mut out: Vec<u8> = Vec::new();
        for s in &self.segments {
            if out.last() != Some(&s.puzzle_id) {
                out.push(s.puzzle_id);
            }
        }
        out
    }

    /// Puzzles made only of `stand` segments; the user is upright and still
    /// for their whole span.
    pub fn stand_puzzles(&self) -> Vec<u8> {
        self.puzzles()
            .into_iter()
            .filter(|&p| {
                self.segments
                    .iter()
                    .filter(|s| s.puzzle_id == p)
                    .all(|s| s.primitive == MotionPrimitive::Stand)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_script_shape() {
        let s = ScenarioScript::default_script();
        assert_eq!(s.total_duration(), 600.0);
        assert_eq!(s.puzzles(), (1..=24).collect::<Vec<u8>>());
        assert_eq!(s.stand_puzzles(), vec![1, 3, 4, 5, 7, 10, 12, 14, 16, 17, 18, 19, 21, 22]);
    }

    #[test]
    fn validation() {
        assert_eq!(ScenarioScript::new(vec![]), Err(ScriptError::EmptyScript));
        let seg = |p, d| Segment { puzzle_id: p, duration_s: d, primitive: MotionPrimitive::Stand };
        assert_eq!(ScenarioScript::new(vec![seg(1, 0.0)]), Err(ScriptError::InvalidDuration { index: 0 }));
        assert_eq!(ScenarioScript::new(vec![seg(25, 1.0)]), Err(ScriptError::InvalidPuzzle { index: 0, id: 25 }));
        assert_eq!(
            ScenarioScript::new(vec![seg(1, 1.0), seg(2, 1.0), seg(1, 1.0)]),
            Err(ScriptError::InterleavedPuzzle { index: 2, id: 1 })
        );
        assert!(ScenarioScript::new(vec![seg(1, 1.0), seg(1, 2.0), seg(2, 1.0)]).is_ok());
    }
}

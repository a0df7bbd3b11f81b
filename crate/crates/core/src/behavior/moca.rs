//! Cognitive-assessment scoring from transcribed spoken answers.
//!
//! Puzzle 7 presents the memory words, 16 naming, 17 serial sevens,
//! 18 delayed recall, 19 abstraction, 20 sentence repetition and 22 the
//! date. Items the game cannot administer (attention digit span, letter
//! fluency, place/city orientation, visuospatial drawing) are credited in
//! full so totals stay on the usual 30-point scale.

use crate::model::{EventPayload, EventRecord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const PASS_THRESHOLD: u8 = 26;
const CREDIT_ATTENTION: u8 = 3;
const CREDIT_FLUENCY: u8 = 1;
const CREDIT_PLACE_CITY: u8 = 2;
const CREDIT_VISUOSPATIAL: u8 = 5;

pub const MEMORY_PUZZLE: u8 = 7;
pub const NAMING_PUZZLE: u8 = 16;
pub const SERIAL7_PUZZLE: u8 = 17;
pub const RECALL_PUZZLE: u8 = 18;
pub const ABSTRACTION_PUZZLE: u8 = 19;
pub const REPETITION_PUZZLE: u8 = 20;
pub const ORIENTATION_PUZZLE: u8 = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDate {
    pub year: u32,
    pub month: u32,
    pub day: u32,
    /// Lowercase English weekday name.
    pub weekday: String,
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
    "december",
];

pub fn month_name(month: u32) -> &'static str {
    MONTHS[(month as usize + 11) % 12]
}

/// Answer key for the assessment as staged in the game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MocaKey {
    /// Each animal with its accepted spoken forms.
    pub animals: Vec<Vec<String>>,
    pub memory_words: Vec<String>,
    pub serial_start: i64,
    /// Accepted category words for each similarity pair.
    pub abstraction: Vec<Vec<String>>,
    pub sentences: Vec<String>,
    pub date: SessionDate,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for MocaKey {
    fn default() -> Self {
        MocaKey {
            animals: vec![strings(&["lion"]), strings(&["rhinoceros", "rhino"]), strings(&["camel", "dromedary"])],
            memory_words: strings(&["face", "velvet", "church", "daisy", "red"]),
            serial_start: 100,
            abstraction: vec![
                strings(&["transportation", "transport", "travel", "vehicles", "vehicle"]),
                strings(&["measurement", "measuring", "measure", "instruments", "instrument"]),
            ],
            sentences: strings(&[
                "i only know that john is the one to help today",
                "the cat always hid under the couch when dogs were in the room",
            ]),
            date: SessionDate { year: 2023, month: 3, day: 15, weekday: "wednesday".into() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MocaScore {
    pub naming: u8,
    /// The memory words were registered; not scored.
    pub memory_registered: bool,
    pub serial7: u8,
    pub attention: u8,
    pub repetition: u8,
    pub abstraction: u8,
    pub recall: u8,
    pub orientation: u8,
    pub language: u8,
    pub visuospatial: u8,
    pub total: u8,
    pub pass: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MocaError {
    #[error("no spoken answer for puzzles {0:?}")]
    MissingPuzzleEvents(Vec<u8>),
}

pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

pub fn serial7_points(correct: usize) -> u8 {
    match correct {
        0 => 0,
        1 => 1,
        2 | 3 => 2,
        _ => 3,
    }
}

impl MocaKey {
    fn naming(&self, text: &str) -> u8 {
        let t = tokens(text);
        self.animals.iter().filter(|forms| forms.iter().any(|f| t.contains(f))).count().min(3) as u8
    }

    fn serial7(&self, text: &str) -> u8 {
        let mut prev = self.serial_start;
        let mut correct = 0;
        for n in tokens(text).iter().filter_map(|t| t.parse::<i64>().ok()).take(5) {
            if n == prev - 7 {
                correct += 1;
            }
            prev = n;
        }
        serial7_points(correct)
    }

    fn recall(&self, text: &str) -> u8 {
        let t = tokens(text);
        self.memory_words.iter().filter(|w| t.contains(w)).count() as u8
    }

    fn abstraction(&self, text: &str) -> u8 {
        text.split('|')
            .zip(&self.abstraction)
            .filter(|(part, accepted)| tokens(part).iter().any(|t| accepted.contains(t)))
            .count() as u8
    }

    fn repetition(&self, text: &str) -> u8 {
        text.split('|')
            .zip(&self.sentences)
            .filter(|(part, sentence)| tokens(part) == tokens(sentence))
            .count() as u8
    }

    /// Year, month, date and weekday, in that order.
    fn orientation(&self, text: &str) -> u8 {
        let t = tokens(text);
        let d = &self.date;
        let expected = [d.year.to_string(), month_name(d.month).to_string(), d.day.to_string(), d.weekday.clone()];
        let month_number = d.month.to_string();
        expected
            .iter()
            .enumerate()
            .filter(|(i, e)| match t.get(*i) {
                Some(tok) => tok == *e || (*i == 1 && *tok == month_number),
                None => false,
            })
            .count() as u8
    }
}

/// Scores the spoken answers in `events`. When a puzzle has several
/// answers, each is scored and the best counts.
pub fn score_moca(events: &[EventRecord], key: &MocaKey) -> Result<MocaScore, MocaError> {
    let mut spoken: BTreeMap<u8, Vec<&str>> = BTreeMap::new();
    for e in events {
        if let EventPayload::SpokenPassword { text } = &e.payload {
            spoken.entry(e.puzzle_id).or_default().push(text);
        }
    }
    let required = [
        MEMORY_PUZZLE,
        NAMING_PUZZLE,
        SERIAL7_PUZZLE,
        RECALL_PUZZLE,
        ABSTRACTION_PUZZLE,
        REPETITION_PUZZLE,
        ORIENTATION_PUZZLE,
    ];
    let missing: Vec<u8> = required.iter().copied().filter(|p| !spoken.contains_key(p)).collect();
    if !missing.is_empty() {
        return Err(MocaError::MissingPuzzleEvents(missing));
    }
    let best = |puzzle: u8, f: &dyn Fn(&str) -> u8| spoken[&puzzle].iter().map(|t| f(t)).max().unwrap_or(0);

    let naming = best(NAMING_PUZZLE, &|t| key.naming(t));
    let serial7 = best(SERIAL7_PUZZLE, &|t| key.serial7(t));
    let recall = best(RECALL_PUZZLE, &|t| key.recall(t));
    let abstraction = best(ABSTRACTION_PUZZLE, &|t| key.abstraction(t));
    let repetition = best(REPETITION_PUZZLE, &|t| key.repetition(t));
    let orientation = best(ORIENTATION_PUZZLE, &|t| key.orientation(t)) + CREDIT_PLACE_CITY;
    let total = naming
        + serial7
        + CREDIT_ATTENTION
        + repetition
        + CREDIT_FLUENCY
        + abstraction
        + recall
        + orientation
        + CREDIT_VISUOSPATIAL;
    Ok(MocaScore {
        naming,
        memory_registered: true,
        serial7,
        attention: CREDIT_ATTENTION,
        repetition,
        abstraction,
        recall,
        orientation,
        language: CREDIT_FLUENCY,
        visuospatial: CREDIT_VISUOSPATIAL,
        total,
        pass: total > PASS_THRESHOLD,
    })
}

//! Ground-truth user profiles drawn from the study's participant
//! distributions.

use super::devices::{DeviceSpec, DeviceTable};
use super::derive_seed;
use crate::env::GeoPoint;
use crate::model::{Hand, HostBenchmark, IPD_RANGE_M};
use crate::stats::round_to_fraction;
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fitness {
    Low,
    Moderate,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    None,
    Mild,
    Severe,
}

impl Severity {
    /// Probability of failing the matching reading test.
    pub fn read_failure_probability(self) -> f64 {
        match self {
            Severity::None => 0.05,
            Severity::Mild => 0.6,
            Severity::Severe => 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disability {
    None,
    Mental,
    Physical,
}

impl Disability {
    pub fn name(self) -> &'static str {
        match self {
            Disability::None => "none",
            Disability::Mental => "mental",
            Disability::Physical => "physical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ethnicity {
    Asian,
    White,
    Black,
    Hispanic,
}

impl Ethnicity {
    pub const ALL: [Ethnicity; 4] = [Ethnicity::Asian, Ethnicity::White, Ethnicity::Black, Ethnicity::Hispanic];

    pub fn name(self) -> &'static str {
        match self {
            Ethnicity::Asian => "asian",
            Ethnicity::White => "white",
            Ethnicity::Black => "black",
            Ethnicity::Hispanic => "hispanic",
        }
    }
}

/// Correct-answer counts per administered assessment item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MocaAnswers {
    /// Animals named, 0-3.
    pub naming: u8,
    /// Correct serial-7 subtractions, 0-5.
    pub serial7: u8,
    /// Sentences repeated verbatim, 0-2.
    pub repetition: u8,
    /// Similarity pairs abstracted, 0-2.
    pub abstraction: u8,
    /// Words recalled, 0-5.
    pub recall: u8,
    /// Date probes answered (year, month, date, weekday), 0-4.
    pub orientation: u8,
}

impl MocaAnswers {
    pub const PERFECT: MocaAnswers =
        MocaAnswers { naming: 3, serial7: 5, repetition: 2, abstraction: 2, recall: 5, orientation: 4 };

    /// Total on the 30-point scale with unadministered items credited:
    /// attention 3, fluency 1, place/city 2, visuospatial 5.
    pub fn total(&self) -> u8 {
        let serial = match self.serial7 {
            4..=5 => 3,
            2..=3 => 2,
            1 => 1,
            _ => 0,
        };
        self.naming + serial + 3 + self.repetition + 1 + self.abstraction + self.recall + self.orientation + 2 + 5
    }

    pub fn pass(&self) -> bool {
        self.total() > 26
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub height_m: f64,
    pub wingspan_m: f64,
    /// Midline to left fingertip with the arm outstretched.
    pub arm_left_m: f64,
    pub arm_right_m: f64,
    pub handedness: Hand,
    pub ipd_m: f64,
    pub fitness: Fitness,
    pub reaction_time_s: f64,
    pub room_length_m: f64,
    pub room_width_m: f64,
    pub location: GeoPoint,
    pub site: String,
    pub device: DeviceSpec,
    /// Spoken languages, always including "en".
    pub languages: BTreeSet<String>,
    /// Which of the non-English languages the user reads the puzzle 13
    /// password in; `None` for English-only users.
    pub gaze_language: Option<String>,
    pub colorblind: bool,
    pub hyperopia: Severity,
    pub myopia: Severity,
    pub moca_answers: MocaAnswers,
    pub gender: Gender,
    pub age_years: u32,
    pub ethnicity: Ethnicity,
    pub disability: Disability,
    /// Multiplier on scripted segment durations.
    pub session_pace: f64,
    pub host: HostBenchmark,
}

pub const REACTION_RANGE_S: (f64, f64) = (0.12, 0.60);
pub const WINGSPAN_RATIO_RANGE: (f64, f64) = (0.9, 1.15);
pub const MAX_ARM_DIFF_M: f64 = 0.06;

impl UserProfile {
    pub fn validate(&self) -> Result<(), String> {
        let ratio = self.wingspan_m / self.height_m;
        if !(WINGSPAN_RATIO_RANGE.0 - 1e-9..=WINGSPAN_RATIO_RANGE.1 + 1e-9).contains(&ratio) {
            return Err(format!("wingspan/height ratio {ratio} outside [0.9, 1.15]"));
        }
        if (self.arm_left_m - self.arm_right_m).abs() > MAX_ARM_DIFF_M + 1e-9 {
            return Err("arm length difference above 6 cm".into());
        }
        if !(REACTION_RANGE_S.0..=REACTION_RANGE_S.1).contains(&self.reaction_time_s) {
            return Err(format!("reaction time {} outside [0.12, 0.60]", self.reaction_time_s));
        }
        if !(IPD_RANGE_M.0..=IPD_RANGE_M.1).contains(&self.ipd_m) {
            return Err(format!("ipd {} outside [0.050, 0.080]", self.ipd_m));
        }
        if !self.device.is_valid() {
            return Err("device spec has a non-positive field".into());
        }
        if !self.languages.contains("en") {
            return Err("languages must include en".into());
        }
        if let Some(g) = &self.gaze_language {
            if !self.languages.contains(g) {
                return Err(format!("gaze language {g} not spoken"));
            }
        }
        if !(self.session_pace.is_finite() && self.session_pace > 0.0) {
            return Err("session pace must be positive".into());
        }
        Ok(())
    }

    pub fn non_english_languages(&self) -> BTreeSet<String> {
        self.languages.iter().filter(|l| *l != "en").cloned().collect()
    }

    pub fn is_fast_reactor(&self) -> bool {
        self.reaction_time_s < 0.25
    }
}

/// Laboratory sites and the share of participants at each.
pub const SITES: [(&str, f64, f64, f64); 4] = [
    ("A", 37.8716, -122.2727, 0.52),
    ("B", 34.0522, -118.2437, 0.40),
    ("C", 47.6062, -122.3321, 0.04),
    ("D", 30.2672, -97.7431, 0.04),
];

const DEVICE_SHARES: [(&str, f64); 3] = [("HTC Vive Pro 2", 0.52), ("Oculus Quest 2", 0.42), ("HTC Vive", 0.06)];

/// Per-ethnicity probability of speaking each non-English language.
fn language_probabilities(e: Ethnicity) -> &'static [(&'static str, f64)] {
    match e {
        Ethnicity::Asian => &[("zh", 0.6667), ("hi", 0.2333), ("es", 0.10), ("fr", 0.15)],
        Ethnicity::White => &[("fr", 0.50), ("es", 0.50), ("pt", 0.10), ("ar", 0.03)],
        Ethnicity::Black => &[("fr", 0.50), ("es", 0.33), ("ar", 0.20)],
        Ethnicity::Hispanic => &[("es", 1.0), ("pt", 0.20)],
    }
}

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [(T, f64)]) -> &'a T {
    let w = WeightedIndex::new(items.iter().map(|x| x.1)).expect("positive weights");
    &items[w.sample(rng)].0
}

fn normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("finite sd").sample(rng)
}

fn int_in(rng: &mut impl Rng, lo: u32, hi: u32) -> u32 {
    rng.random_range(lo..=hi)
}

/// Draws one profile. Deterministic in the RNG state.
pub fn sample_profile(rng: &mut impl Rng, user_id: String, devices: &DeviceTable) -> UserProfile {
    let gender = if rng.random_bool(0.52) { Gender::Male } else { Gender::Female };
    let height_bins: [((u32, u32), f64); 3] = match gender {
        Gender::Male => [((150, 165), 0.10), ((166, 175), 0.40), ((176, 189), 0.50)],
        Gender::Female => [((150, 165), 0.6417), ((166, 175), 0.2333), ((176, 189), 0.125)],
    };
    let (lo, hi) = *pick(rng, &height_bins);
    let height_cm = int_in(rng, lo, hi);
    let height_m = height_cm as f64 / 100.0;

    let ratio_mean = if gender == Gender::Male { 1.04 } else { 1.00 };
    let ratio = normal(rng, ratio_mean, 0.015).clamp(0.9, 1.15);
    let mut wingspan_cm = (ratio * height_cm as f64).round();
    wingspan_cm = wingspan_cm.clamp((0.9 * height_cm as f64).ceil(), (1.15 * height_cm as f64).floor());
    let wingspan_m = wingspan_cm / 100.0;

    // Arm difference on a millimetre grid, truncated to +-6 cm.
    let diff_mm = loop {
        let d = normal(rng, 0.004, 0.02);
        if d.abs() <= MAX_ARM_DIFF_M {
            break (d * 1000.0).round() as i64;
        }
    };
    let span_mm = (wingspan_cm as i64) * 10;
    let left_mm = (span_mm + diff_mm).div_euclid(2);
    let right_mm = span_mm - left_mm;
    let arm_left_m = left_mm as f64 / 1000.0;
    let arm_right_m = right_mm as f64 / 1000.0;

    let ipd_mean = if gender == Gender::Male { 0.0645 } else { 0.0610 };
    let ipd_m = round_to_fraction(normal(rng, ipd_mean, 0.0018).clamp(0.052, 0.078), 10_000.0);

    let handedness = if rng.random_bool(0.94) { Hand::Right } else { Hand::Left };

    let age_years = match *pick(rng, &[(0u8, 0.48), (1, 0.40), (2, 0.12)]) {
        0 => int_in(rng, 18, 23),
        1 => int_in(rng, 24, 27),
        _ => (28.0 + Exp::new(1.0_f64 / 6.0).unwrap().sample(rng)).floor().min(64.0) as u32,
    };
    let rt = normal(rng, 0.225 + 0.004 * (age_years as f64 - 18.0), 0.03);
    let k = (rt * 60.0).round().clamp(8.0, 36.0);
    let reaction_time_s = k / 60.0;

    let disability = *pick(rng, &[(Disability::None, 0.92), (Disability::Mental, 0.06), (Disability::Physical, 0.02)]);
    let fitness = if disability == Disability::Physical {
        Fitness::Low
    } else {
        *pick(rng, &[(Fitness::Low, 0.16), (Fitness::Moderate, 0.64), (Fitness::High, 0.20)])
    };
    let colorblind = rng.random_bool(0.04);
    let hyperopia = *pick(rng, &[(Severity::None, 0.56), (Severity::Mild, 0.18), (Severity::Severe, 0.26)]);
    let myopia = *pick(rng, &[(Severity::None, 0.28), (Severity::Mild, 0.08), (Severity::Severe, 0.64)]);

    let ethnicity = *pick(rng, &[(Ethnicity::Asian, 0.60), (Ethnicity::White, 0.28), (Ethnicity::Black, 0.06), (Ethnicity::Hispanic, 0.06)]);
    let probs = language_probabilities(ethnicity);
    let mut foreign: Vec<String> = probs.iter().filter(|(_, p)| rng.random_bool(*p)).map(|(l, _)| l.to_string()).collect();
    if foreign.is_empty() && rng.random_bool(0.38) {
        foreign.push(pick(rng, probs).to_string());
    }
    let gaze_language = foreign.choose(rng).cloned();
    let mut languages: BTreeSet<String> = foreign.into_iter().collect();
    languages.insert("en".into());

    let moca_answers = sample_moca(rng, disability);

    let device_name = *pick(rng, &DEVICE_SHARES);
    let device = devices.get(device_name).cloned().unwrap_or_else(|| devices.devices[0].clone());
    let &(site, lat, lon, _) = pick_site(rng);

    let area = match *pick(rng, &[(0u8, 0.08), (1, 0.52), (2, 0.40)]) {
        0 => rng.random_range(3.5..5.0),
        1 => rng.random_range(5.0..8.0),
        _ => rng.random_range(8.0..12.0),
    };
    let aspect: f64 = rng.random_range(1.0..1.5);
    let room_length_m = round_to_fraction((area * aspect).sqrt(), 10.0);
    let room_width_m = round_to_fraction(area / (area * aspect).sqrt(), 10.0);

    let session_pace = (1.2 + 0.06 * (age_years as f64 - 18.0) + normal(rng, 0.0, 0.02)).clamp(1.0, 3.0);
    let host = HostBenchmark {
        cpu_ghz: round_to_fraction(rng.random_range(2.4..5.2), 10.0),
        gpu_mhs: rng.random_range(8.0..150.0f64).round(),
    };

    UserProfile {
        user_id,
        height_m,
        wingspan_m,
        arm_left_m,
        arm_right_m,
        handedness,
        ipd_m,
        fitness,
        reaction_time_s,
        room_length_m,
        room_width_m,
        location: GeoPoint::new(lat, lon),
        site: site.to_string(),
        device,
        languages,
        gaze_language,
        colorblind,
        hyperopia,
        myopia,
        moca_answers,
        gender,
        age_years,
        ethnicity,
        disability,
        session_pace,
        host,
    }
}

fn pick_site(rng: &mut impl Rng) -> &'static (&'static str, f64, f64, f64) {
    let w = WeightedIndex::new(SITES.iter().map(|s| s.3)).unwrap();
    &SITES[w.sample(rng)]
}

/// Item misses follow a per-user lapse rate; mental disability raises it.
fn sample_moca(rng: &mut impl Rng, disability: Disability) -> MocaAnswers {
    let mut m: f64 = Gamma::new(2.0, 0.75).unwrap().sample(rng);
    if disability == Disability::Mental {
        m *= 2.5;
    }
    let mut count = |n: u8, base: f64| -> u8 {
        let p = (base * m).min(0.95);
        (0..n).filter(|_| !rng.random_bool(p)).count() as u8
    };
    MocaAnswers {
        naming: count(3, 0.03),
        serial7: count(5, 0.05),
        repetition: count(2, 0.07),
        abstraction: count(2, 0.07),
        recall: count(5, 0.10),
        orientation: count(4, 0.02),
    }
}

pub fn user_id(index: usize) -> String {
    format!("u{index:04}")
}

/// `n` profiles; profile `i` is drawn from its own stream seeded by
/// `(seed, i)`, so the result does not depend on worker scheduling.
pub fn sample_population(n: usize, seed: u64) -> Vec<UserProfile> {
    let devices = DeviceTable::shipped();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            sample_profile(&mut rng, user_id(i), &devices)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_profile_is_valid() {
        let p = &sample_population(1, 3)[0];
        p.validate().unwrap();
        assert_eq!(p.user_id, "u0000");
    }

    #[test]
    fn right_handed_share_for_50() {
        let right = sample_population(50, 2024).iter().filter(|p| p.handedness == Hand::Right).count();
        assert!((44..=50).contains(&right), "{right}");
    }

    #[test]
    fn moca_total_rubric() {
        assert_eq!(MocaAnswers::PERFECT.total(), 30);
        let m = MocaAnswers { naming: 2, recall: 3, ..MocaAnswers::PERFECT };
        assert_eq!(m.total(), 27);
        assert!(m.pass());
        let m = MocaAnswers { recall: 2, ..m };
        assert_eq!(m.total(), 26);
        assert!(!m.pass());
    }

    #[test]
    fn deterministic() {
        assert_eq!(sample_population(5, 9), sample_population(5, 9));
        assert_ne!(sample_population(5, 9), sample_population(5, 10));
    }
}

//! Order statistics and scoring helpers shared by extractors and the evaluator.

/// Percentile with linear interpolation between closest ranks
/// (rank = p/100 * (n-1)). `p` is clamped to [0, 100]. Returns `None` on empty input.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(percentile_sorted(&sorted, p))
}

/// Same as [`percentile`] but on data the caller already sorted ascending.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = p.clamp(0.0, 100.0) / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 50.0)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Rounds to the nearest multiple of `step`.
pub fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

/// Rounds to the nearest multiple of `1/per_unit`, computed as `k / per_unit`
/// so that values already on the grid come back bit-identical.
pub fn round_to_fraction(x: f64, per_unit: f64) -> f64 {
    (x * per_unit).round() / per_unit
}

/// Coefficient of determination of `predicted` against `actual`.
/// Returns `None` when fewer than two points or zero variance in `actual`.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Option<f64> {
    if actual.len() != predicted.len() || actual.len() < 2 {
        return None;
    }
    let m = mean(actual)?;
    let ss_tot: f64 = actual.iter().map(|a| (a - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum();
    Some(1.0 - ss_res / ss_tot)
}

/// F1 score of binary predictions with `true` as the positive class.
/// `None` if there are no positives in either truth or prediction.
pub fn f1_score(actual: &[bool], predicted: &[bool]) -> Option<f64> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    for (&a, &p) in actual.iter().zip(predicted) {
        match (a, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fne += 1,
            _ => {}
        }
    }
    if tp + fp + fne == 0 {
        return None;
    }
    Some(2.0 * tp as f64 / (2 * tp + fp + fne) as f64)
}
